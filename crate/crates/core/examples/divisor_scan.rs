//! Scans small divisors `ω·k ± λ_a ± λ_b` for a tangential set and reports
//! the worst offenders, then estimates how much of the mass interval a
//! large `κ` would exclude.
//!
//! ```text
//! cargo run --release --example divisor_scan
//! ```

use kamwave::smalldiv::{check_query, excluded_mass_scan, scan, DivisorQuery, ScanConfig};
use kamwave::spectrum::{AdmissibleSet, FrequencySystem, Mass};

fn main() -> kamwave::Result<()> {
    let set = AdmissibleSet::new(&[1, 3])?;
    let fs = FrequencySystem::new(Mass::new(1.3)?, set.clone());

    let cfg = ScanConfig::new(1e-6, 8, Some(60));
    let out = scan(&fs, &cfg)?;
    println!(
        "kappa = 1e-6, |k|_1 <= 8: {} divisors checked, {} resonant skipped, {} violations",
        out.checked,
        out.resonant_skipped,
        out.violations.len()
    );

    let q = DivisorQuery::d3(vec![1, -1], 4, 2);
    let r = check_query(&q, &fs, 1e-3)?;
    println!(
        "single query {:?} k = {:?}: value {:+.6e}, required {:.3e}, satisfied {}",
        q.kind, q.k, r.value, r.bound_required, r.satisfied
    );

    let mut loose = ScanConfig::new(5e-2, 3, Some(20));
    loose.certify = true;
    let out = scan(&fs, &loose)?;
    println!("\nkappa = 5e-2, |k|_1 <= 3: {} violations, smallest five:", out.violations.len());
    let mut worst = out.violations.clone();
    worst.sort_by(|a, b| a.value.abs().total_cmp(&b.value.abs()));
    for v in worst.iter().take(5) {
        println!(
            "  {:?} k = {:?} a = {:?} b = {:?}: {:+.4e} < {:.4e} (certified {:?})",
            v.query.kind, v.query.k, v.query.a, v.query.b, v.value, v.bound_required, v.certified
        );
    }

    let est = excluded_mass_scan(&set, &ScanConfig::new(1e-2, 3, Some(20)), 2000)?;
    println!(
        "\nmasses with some violation at kappa = 1e-2: {:.3} of [1, 2] (analytic bound {:.3e})",
        est.sampled_measure, est.analytic_bound
    );
    Ok(())
}
