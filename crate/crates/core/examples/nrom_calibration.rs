//! Fits the constants `C(n)` of the non-resonance measure bound.
//!
//! For every admissible set inside `{|a| ≤ 3}` the largest ratio
//! `mes{m : |k·ω(m) + c| ≤ χ} · |k|₁ / (N^{2n²} χ^{1/n})` is measured over
//! `0 < |k|₁ ≤ 3`, offsets `c ∈ {0, ±0.5, ±1.5}` and `χ ∈ {1e-2, 1e-3, 1e-4}`.
//! The worst ratio per cardinality, times a safety factor of 2, is printed
//! next to the constants currently compiled into the library.
//!
//! ```text
//! cargo run --release --example nrom_calibration [grid]
//! ```

use kamwave::spectrum::{nrom_constant, nrom_ratio, AdmissibleSet};

fn admissible_sets(radius: i64) -> Vec<Vec<i64>> {
    // Each |a| ≥ 1 contributes nothing, +a or −a; 0 is in or out.
    let mut sets = vec![Vec::new()];
    for a in 0..=radius {
        let choices: Vec<Option<i64>> = if a == 0 {
            vec![None, Some(0)]
        } else {
            vec![None, Some(a), Some(-a)]
        };
        sets = sets
            .into_iter()
            .flat_map(|s| {
                choices.iter().map(move |c| {
                    let mut t = s.clone();
                    t.extend(c);
                    t
                })
            })
            .collect();
    }
    sets.retain(|s| !s.is_empty());
    sets
}

fn main() -> kamwave::Result<()> {
    let grid: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("grid must be an integer"))
        .unwrap_or(20_000);
    let offsets = [0.0, 0.5, -0.5, 1.5, -1.5];
    let chis = [1e-2, 1e-3, 1e-4];

    let mut worst = [0.0f64; 4];
    let mut argmax: [Vec<i64>; 4] = Default::default();
    for modes in admissible_sets(3) {
        let set = AdmissibleSet::new(&modes)?;
        let r = nrom_ratio(&set, 3, &offsets, &chis, grid)?;
        let n = set.n();
        if r > worst[n - 1] {
            worst[n - 1] = r;
            argmax[n - 1] = set.modes().to_vec();
        }
    }

    println!("n  worst_ratio   fitted(x2)    compiled    worst_set");
    for n in 1..=4 {
        println!(
            "{n}  {:<12.4e} {:<12.4e}  {:<10.4e}  {:?}",
            worst[n - 1],
            2.0 * worst[n - 1],
            nrom_constant(n),
            argmax[n - 1]
        );
    }
    Ok(())
}
