//! Integrates the Galerkin-truncated wave equation from a point on a
//! linear torus and compares the measured frequencies with the
//! first-order prediction `ω + M·I`.
//!
//! With two tangential modes the prediction from the full modulation
//! matrix and from the Hessian of the action part of the normal form are
//! both printed, so the difference between them can be seen.
//!
//! ```text
//! cargo run --release --example torus_frequency_shift [t_end]
//! ```

use kamwave::simulate::{compare_frequencies, integrate, torus_distance, SimConfig};

fn run(modes: Vec<i64>, rho: &[f64], nu: f64, t_end: f64) -> kamwave::Result<()> {
    let actions: Vec<f64> = rho.iter().map(|r| nu * r).collect();
    let cfg = SimConfig::new(24, 1.3, modes.clone(), actions.clone(), 5e-4, t_end);
    let traj = integrate(&cfg)?;
    let cmp = compare_frequencies(&traj, &actions)?;
    println!("modes {modes:?}, nu = {nu:e}, T = {t_end}");
    for (i, a) in cmp.modes.iter().enumerate() {
        println!(
            "  mode {a}: omega {:.10}  measured {:.10}  omega+M I {:.10} (gap {:.2e})  Z4 Hessian {:.10} (gap {:.2e})",
            cmp.omega[i], cmp.extracted[i], cmp.predicted[i], cmp.gap[i], cmp.predicted_z4[i], cmp.gap_z4[i]
        );
    }
    println!(
        "  energy drift {:.2e}, reality defect {:.2e}, distance to linear torus {:.2e}, bound 10 nu^1.5 = {:.2e}",
        traj.energy_drift(),
        traj.max_reality_defect(),
        torus_distance(&traj, &actions, 1.0)?,
        10.0 * nu.powf(1.5)
    );
    Ok(())
}

fn main() -> kamwave::Result<()> {
    let t_end: f64 = std::env::args().nth(1).map(|s| s.parse().expect("t_end")).unwrap_or(500.0);
    run(vec![1], &[1.5], 1e-3, t_end)?;
    run(vec![1, 2], &[1.5, 1.2], 1e-3, t_end)?;
    Ok(())
}
