//! Checks the separation, transversality and second Melnikov hypotheses
//! for the rescaled frequencies of a one-mode torus, and shows how the
//! accepted fraction reacts to the Melnikov constant.
//!
//! ```text
//! cargo run --release --example kam_hypotheses
//! ```

use kamwave::birkhoff::{rescale, solve_homological, NormalFormConfig};
use kamwave::kamcheck::{check_a1, check_transversality, kappa_sweep, melnikov_scan, TransversalityConfig};
use kamwave::polyham::build_p4;
use kamwave::spectrum::{AdmissibleSet, FrequencySystem, Mass};

fn main() -> kamwave::Result<()> {
    let fs = FrequencySystem::new(Mass::new(1.3)?, AdmissibleSet::new(&[1])?);
    let nf = solve_homological(&build_p4(8, &fs), &fs, &NormalFormConfig::default())?;

    for nu in [1e-3, 1e-4] {
        let rnf = rescale(&nf, &fs, nu, &[1.5])?;
        let a1 = check_a1(&rnf, 60, 100);
        let a2 = check_transversality(&rnf, &TransversalityConfig::new(20, 60, 0.1))?;
        let a3 = melnikov_scan(&rnf, 1e-6, 10, 40, 100, 0.1)?;
        println!("nu = {nu:e}");
        for r in [&a1, &a2, &a3] {
            println!(
                "  {}: checked {:>7}, violations {:>3}, accepted {:?}, verified {}",
                r.hypothesis,
                r.checked_count,
                r.violations.len(),
                r.accepted_fraction,
                r.verified
            );
        }
        if let Some(v) = a2.violations.first() {
            println!("  first A2 record: {}", v.record_line());
        }
        println!("  A2 branches: {:?}", a2.branches);
    }

    let rnf = rescale(&nf, &fs, 1e-3, &[1.5])?;
    println!("\naccepted fraction against kappa (N = 10, S = 40)");
    for (kappa, fraction) in kappa_sweep(&rnf, &[1e-6, 1e-5, 1e-4, 1e-3, 1e-2], 10, 40, 100) {
        println!("  kappa = {kappa:e}: {fraction:.3}");
    }
    Ok(())
}
