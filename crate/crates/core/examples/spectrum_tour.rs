//! Linear frequencies, admissibility and the determinant machinery that
//! controls how often a frequency combination can be small.
//!
//! ```text
//! cargo run --release --example spectrum_tour
//! ```

use kamwave::spectrum::{
    admissibility_witness, frequency, frequency_derivative, sublevel_measure, vandermonde_determinant,
    vandermonde_product, volume_pick, AdmissibleSet, Mass,
};

fn main() -> kamwave::Result<()> {
    let m = Mass::new(1.3)?;
    println!("frequencies at m = {}", m.value());
    for s in [0, 1, 2, 5, 10, 100] {
        let l = frequency(s, m);
        println!("  s = {s:>3}  lambda = {l:.12}  lambda - |s| = {:.3e}", l - s.abs() as f64);
    }

    println!("\nadmissibility");
    for modes in [vec![0, 1, 5], vec![1, -1], vec![-3, 0, 2]] {
        match admissibility_witness(&modes)? {
            None => println!("  {modes:?}: admissible"),
            Some(w) => println!("  {modes:?}: not admissible, contains +-{w}"),
        }
    }

    let set = AdmissibleSet::new(&[0, 1, 5])?;
    println!("\nmass derivatives d^j lambda_a / dm^j for {:?}", set.modes());
    for &a in set.modes() {
        let ds: Vec<String> = (1..=3)
            .map(|j| frequency_derivative(a, m, j).map(|d| format!("{d:+.6e}")))
            .collect::<kamwave::Result<_>>()?;
        println!("  a = {a:>2}: {}", ds.join("  "));
    }
    let direct = vandermonde_determinant(set.modes(), m)?;
    let closed = vandermonde_product(set.modes(), m)?;
    println!("\nderivative determinant: direct {direct:.12e}, closed form {closed:.12e}");

    let vectors = vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]];
    let w = [0.3, -0.2, 0.9];
    let pick = volume_pick(&vectors, &w, None)?;
    println!(
        "\nvolume pick: vector {} with |u.w| = {:.4} >= guaranteed {:.4} (volume {:.3})",
        pick.index, pick.value, pick.bound, pick.volume
    );

    // |ω₁(m) − 1.5| has first derivative ≥ 1/(2√3) on [1, 2].
    let est = sublevel_measure(|m| (1.0 + m).sqrt() - 1.5, 1e-3, 1, 1.0 / (2.0 * 3f64.sqrt()), 100_000)?;
    println!(
        "sublevel set {{|lambda_1 - 1.5| < 1e-3}}: sampled {:.3e}, bound {:.3e}",
        est.sampled_measure, est.analytic_bound
    );
    Ok(())
}
