//! Linear frequencies `λ_s = √(s² + m)`, tangential mode sets, and the
//! determinant/volume/sublevel-set machinery used to control how often a
//! frequency combination can be small as the mass varies.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass parameter of the wave equation, restricted to `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Mass(f64);

impl Mass {
    pub fn new(m: f64) -> Result<Self> {
        if (1.0..=2.0).contains(&m) {
            Ok(Mass(m))
        } else {
            Err(Error::InvalidMass(m))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `λ_s = √(s² + m)`.
pub fn frequency(s: i64, m: Mass) -> f64 {
    let s = s as f64;
    (s * s + m.0).sqrt()
}

/// Coefficient `(2j−2)! / (2^{2j−1} (j−1)!)` of the `j`-th mass derivative.
fn derivative_coefficient(j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidInput("derivative order must be >= 1".into()));
    }
    // c_1 = 1/2, c_{j+1} = c_j (2j - 1) / 2
    let mut c = 0.5f64;
    for i in 1..j {
        c *= (2.0 * i as f64 - 1.0) / 2.0;
    }
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::Overflow(format!("derivative coefficient of order {j}")))
    }
}

/// `dʲω_a/dmʲ` for `ω_a = √(a² + m)`.
pub fn frequency_derivative(a: i64, m: Mass, j: u32) -> Result<f64> {
    let c = derivative_coefficient(j)?;
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    let x = (a as f64).powi(2) + m.0;
    let v = sign * c / x.powf(j as f64 - 0.5);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("derivative of order {j} at mode {a}")))
    }
}

fn check_duplicates(sorted: &[i64]) -> Result<()> {
    match sorted.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(Error::DuplicateMode(w[0])),
        None => Ok(()),
    }
}

/// Smallest positive `j` such that both `j` and `−j` appear, if any.
pub fn admissibility_witness(modes: &[i64]) -> Result<Option<i64>> {
    let mut sorted = modes.to_vec();
    sorted.sort_unstable();
    check_duplicates(&sorted)?;
    Ok(sorted
        .iter()
        .copied()
        .filter(|&j| j > 0)
        .find(|&j| sorted.binary_search(&-j).is_ok()))
}

/// True iff no nonzero `j` in `modes` has `−j` in `modes` as well.
pub fn is_admissible(modes: &[i64]) -> Result<bool> {
    Ok(admissibility_witness(modes)?.is_none())
}

/// Finite, strictly sorted set of tangential modes.
///
/// The complement `ℒ = ℤ ∖ 𝒜` holds the normal modes; `𝒜⁻` is the part of
/// `ℒ` mirroring `𝒜` and `ℒ^∞` the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    modes: Vec<i64>,
    admissible: bool,
}

impl AdmissibleSet {
    pub fn new(modes: &[i64]) -> Result<Self> {
        let set = Self::new_unchecked(modes)?;
        if let Some(w) = admissibility_witness(&set.modes)? {
            return Err(Error::NotAdmissible { witness: w });
        }
        Ok(set)
    }

    /// Builds a mode set without enforcing admissibility. Duplicates and
    /// empty input are still rejected. Useful for demonstrating what goes
    /// wrong on sets such as `{1, −1}`.
    pub fn new_unchecked(modes: &[i64]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidInput("empty mode set".into()));
        }
        let mut sorted = modes.to_vec();
        sorted.sort_unstable();
        check_duplicates(&sorted)?;
        let admissible = admissibility_witness(&sorted)?.is_none();
        Ok(AdmissibleSet {
            modes: sorted,
            admissible,
        })
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    /// `max |a|` over the set.
    pub fn n_bound(&self) -> i64 {
        self.modes.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    pub fn contains(&self, s: i64) -> bool {
        self.modes.binary_search(&s).is_ok()
    }

    /// Position of `a` in the sorted mode list.
    pub fn position(&self, a: i64) -> Option<usize> {
        self.modes.binary_search(&a).ok()
    }

    /// `s ∈ ℒ`.
    pub fn is_normal(&self, s: i64) -> bool {
        !self.contains(s)
    }

    /// `s ∈ 𝒜⁻`: a normal mode whose mirror is tangential.
    pub fn in_mirror(&self, s: i64) -> bool {
        self.is_normal(s) && self.contains(-s)
    }

    /// `s ∈ ℒ^∞ = ℒ ∖ 𝒜⁻`.
    pub fn in_far_normal(&self, s: i64) -> bool {
        self.is_normal(s) && !self.contains(-s)
    }

    /// Normal modes with `|s| ≤ cutoff`, ascending.
    pub fn normal_modes(&self, cutoff: i64) -> Vec<i64> {
        (-cutoff..=cutoff).filter(|&s| self.is_normal(s)).collect()
    }
}

/// Frequencies attached to a mass and a tangential set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySystem {
    mass: Mass,
    set: AdmissibleSet,
}

impl FrequencySystem {
    pub fn new(mass: Mass, set: AdmissibleSet) -> Self {
        FrequencySystem { mass, set }
    }

    pub fn mass(&self) -> Mass {
        self.mass
    }

    pub fn set(&self) -> &AdmissibleSet {
        &self.set
    }

    /// Normal frequency `λ_s`.
    pub fn lambda(&self, s: i64) -> f64 {
        frequency(s, self.mass)
    }

    /// Tangential frequency vector `ω`, ordered like the mode set.
    pub fn omega(&self) -> Vec<f64> {
        self.set.modes().iter().map(|&a| self.lambda(a)).collect()
    }

    pub fn derivative(&self, a: i64, j: u32) -> Result<f64> {
        frequency_derivative(a, self.mass, j)
    }
}

fn check_subset(subset: &[i64]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("empty subset".into()));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    check_duplicates(&sorted)
}

/// Matrix `[dʲω_{a_i}/dmʲ]` with rows `j = 1..p` and columns `i`.
pub fn derivative_matrix(subset: &[i64], m: Mass) -> Result<DMatrix<f64>> {
    check_subset(subset)?;
    let p = subset.len();
    let mut out = DMatrix::zeros(p, p);
    for (i, &a) in subset.iter().enumerate() {
        for j in 0..p {
            out[(j, i)] = frequency_derivative(a, m, j as u32 + 1)?;
        }
    }
    Ok(out)
}

/// Determinant of the mass-derivative matrix, evaluated directly by LU.
pub fn vandermonde_determinant(subset: &[i64], m: Mass) -> Result<f64> {
    Ok(derivative_matrix(subset, m)?.determinant())
}

/// Closed-form value of [`vandermonde_determinant`].
///
/// Each column factors as `ω_i⁻¹ · x_i^{j−1}` with `x_i = ω_i⁻²`, so the
/// determinant is `∏_j c_j(−1)^{j+1} · ∏_i ω_i⁻¹ · ∏_{l<k} (a_l² − a_k²)/(ω_l² ω_k²)`.
pub fn vandermonde_product(subset: &[i64], m: Mass) -> Result<f64> {
    check_subset(subset)?;
    let p = subset.len();
    let mut prod = 1.0;
    for j in 1..=p as u32 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        prod *= sign * derivative_coefficient(j)?;
    }
    let w: Vec<f64> = subset.iter().map(|&a| frequency(a, m)).collect();
    for wi in &w {
        prod /= wi;
    }
    for l in 0..p {
        for k in l + 1..p {
            let al = subset[l] as f64;
            let ak = subset[k] as f64;
            prod *= (al * al - ak * ak) / (w[l] * w[l] * w[k] * w[k]);
        }
    }
    Ok(prod)
}

/// Hadamard bound `∏_rows ‖row‖₂` for the derivative matrix; the natural
/// scale against which a vanishing determinant is compared.
pub fn vandermonde_scale(subset: &[i64], m: Mass) -> Result<f64> {
    let d = derivative_matrix(subset, m)?;
    Ok(d.row_iter().map(|r| r.norm()).product())
}

/// Outcome of [`volume_pick`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumePick {
    /// Zero-based index of the chosen vector.
    pub index: usize,
    /// `|u_index · w|`.
    pub value: f64,
    /// Guaranteed lower bound `‖w‖₂ V_p / (p K^{p−1})`.
    pub bound: f64,
    /// Parallelepiped volume `√det(Gram)`.
    pub volume: f64,
    /// ℓ¹ bound `K` used in the guarantee.
    pub l1_bound: f64,
}

/// Picks the vector with the largest inner product against `w`.
///
/// When `w` lies in the span of `p` independent vectors of ℓ¹ norm at most
/// `K`, the winner satisfies `|u·w| ≥ ‖w‖₂ V_p / (p K^{p−1})`. `K` defaults to
/// the largest ℓ¹ norm among the vectors.
pub fn volume_pick(vectors: &[Vec<f64>], w: &[f64], l1_bound: Option<f64>) -> Result<VolumePick> {
    let p = vectors.len();
    if p == 0 {
        return Err(Error::InvalidInput("no vectors".into()));
    }
    let n = w.len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let u = DMatrix::from_fn(n, p, |r, c| vectors[c][r]);
    let gram = u.transpose() * &u;
    let scale: f64 = u.column_iter().map(|c| c.norm_squared()).product();
    let det = gram.determinant();
    if !(det > 1e-12 * scale) {
        return Err(Error::InvalidInput("vectors are linearly dependent".into()));
    }
    let wv = DVector::from_column_slice(w);
    let coeffs = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("vectors are linearly dependent".into()))?
        .solve(&(u.transpose() * &wv));
    let residual = (&wv - &u * coeffs).norm();
    if residual > 1e-9 * wv.norm() {
        return Err(Error::Precondition(format!(
            "w is not in the span (residual {residual:.3e})"
        )));
    }
    let max_l1 = vectors
        .iter()
        .map(|v| v.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let k = l1_bound.unwrap_or(max_l1);
    if k < max_l1 {
        return Err(Error::InvalidInput(format!(
            "l1 bound {k} below actual max {max_l1}"
        )));
    }
    let (index, value) = u
        .column_iter()
        .map(|c| c.dot(&wv).abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let volume = det.sqrt();
    let bound = wv.norm() * volume / (p as f64 * k.powi(p as i32 - 1));
    Ok(VolumePick {
        index,
        value,
        bound,
        volume,
        l1_bound: k,
    })
}

/// Measure of a set of masses in `[1, 2]`: an analytic bound next to a grid
/// estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub analytic_bound: f64,
    pub sampled_measure: f64,
    pub grid_points: usize,
    /// Named constants and exponents that went into `analytic_bound`.
    pub parameters: BTreeMap<String, f64>,
}

impl MeasureEstimate {
    /// Slack allowed between the sampled value and the bound: two cells per
    /// grid boundary crossing.
    pub fn slack(&self, boundary_cells: usize) -> f64 {
        2.0 / self.grid_points as f64 * boundary_cells as f64
    }
}

/// Cell-centred mass grid on `[1, 2]`.
pub fn mass_grid(points: usize) -> impl IndexedParallelIterator<Item = f64> {
    (0..points)
        .into_par_iter()
        .map(move |i| 1.0 + (i as f64 + 0.5) / points as f64)
}

/// Fraction of grid masses where `pred` holds; fails on the first mass at
/// which `pred` reports a non-finite evaluation.
fn sampled_fraction<F>(points: usize, pred: F) -> Result<f64>
where
    F: Fn(f64) -> Result<bool> + Sync,
{
    let hits: Result<Vec<bool>> = mass_grid(points).map(|m| pred(m)).collect();
    let count = hits?.into_iter().filter(|&b| b).count();
    Ok(count as f64 / points as f64)
}

/// Sublevel set `{m ∈ [1,2] : |g(m)| < h}` for a function whose `p`-th
/// derivative is bounded below by `d`.
///
/// The bound is `2(2 + 3 + … + p + 1/d) h^{1/p}`; for `p = 1` the sum is empty
/// and the bound reduces to `2h/d`.
pub fn sublevel_measure<G>(g: G, h: f64, p: u32, d: f64, grid: usize) -> Result<MeasureEstimate>
where
    G: Fn(f64) -> f64 + Sync,
{
    if !(h > 0.0) || !(d > 0.0) || p == 0 || grid < 2 {
        return Err(Error::InvalidInput(
            "need h > 0, d > 0, p >= 1, grid >= 2".into(),
        ));
    }
    let sum: f64 = (2..=p).map(|j| j as f64).sum::<f64>() + 1.0 / d;
    let constant = 2.0 * sum;
    let sampled = sampled_fraction(grid, |m| {
        let v = g(m);
        if v.is_finite() {
            Ok(v.abs() < h)
        } else {
            Err(Error::NonFinite { at: m })
        }
    })?;
    let parameters = BTreeMap::from([
        ("h".to_string(), h),
        ("p".to_string(), p as f64),
        ("d".to_string(), d),
        ("M".to_string(), constant),
    ]);
    Ok(MeasureEstimate {
        analytic_bound: constant * h.powf(1.0 / p as f64),
        sampled_measure: sampled,
        grid_points: grid,
        parameters,
    })
}

/// Fitted constants `C(n)` for [`nrom_excluded_bound`], indexed by `n − 1`.
///
/// Produced by `nrom_calibration` (see the crate examples): the largest ratio
/// `mes · |k|₁ / (N^{2n²} χ^{1/n})` seen over all admissible sets in
/// `{|a| ≤ 3}`, `|k|₁ ≤ 3`, offsets `c ∈ {0, ±0.5, ±1.5}` and
/// `χ ∈ {1e-2, 1e-3, 1e-4}`, multiplied by 2.
pub const NROM_CONSTANTS: [f64; 4] = [NROM_C1, NROM_C2, NROM_C3, NROM_C4];
const NROM_C1: f64 = 12.0;
const NROM_C2: f64 = 1.2;
const NROM_C3: f64 = 4.3e-6;
const NROM_C4: f64 = 7.7e-16;

/// Constant `C(n)` used by [`nrom_excluded_bound`]. Beyond the calibrated
/// range the `n = 4` value is reused.
pub fn nrom_constant(n: usize) -> f64 {
    NROM_CONSTANTS[n.clamp(1, NROM_CONSTANTS.len()) - 1]
}

/// Masses where `|Σ k_a ω_a(m) + c| ≤ χ`, against `C(n) N^{2n²} χ^{1/n} / |k|₁`.
pub fn nrom_excluded_bound(
    set: &AdmissibleSet,
    k: &[i64],
    c: f64,
    chi: f64,
    grid: usize,
) -> Result<MeasureEstimate> {
    if k.len() != set.n() {
        return Err(Error::InvalidInput("k has wrong dimension".into()));
    }
    if k.iter().all(|&x| x == 0) {
        return Err(Error::InvalidInput("k = 0 is the trivially resonant case".into()));
    }
    if !(chi > 0.0) || grid < 2 {
        return Err(Error::InvalidInput("need chi > 0 and grid >= 2".into()));
    }
    let n = set.n();
    let big_n = set.n_bound().max(1) as f64;
    let k1: i64 = k.iter().map(|x| x.abs()).sum();
    let constant = nrom_constant(n);
    let modes = set.modes().to_vec();
    let sampled = sampled_fraction(grid, |m| {
        let v: f64 = modes
            .iter()
            .zip(k)
            .map(|(&a, &ka)| ka as f64 * ((a * a) as f64 + m).sqrt())
            .sum::<f64>()
            + c;
        Ok(v.abs() <= chi)
    })?;
    let bound = constant * big_n.powi(2 * (n * n) as i32) * chi.powf(1.0 / n as f64) / k1 as f64;
    let parameters = BTreeMap::from([
        ("chi".to_string(), chi),
        ("N".to_string(), big_n),
        ("n".to_string(), n as f64),
        ("k_l1".to_string(), k1 as f64),
        ("C".to_string(), constant),
    ]);
    Ok(MeasureEstimate {
        analytic_bound: bound,
        sampled_measure: sampled,
        grid_points: grid,
        parameters,
    })
}

/// Largest observed ratio `mes · |k|₁ / (N^{2n²} χ^{1/n})` for one set,
/// scanning all `k` with `0 < |k|₁ ≤ kmax` and the given offsets and `χ`
/// values.
pub fn nrom_ratio(
    set: &AdmissibleSet,
    kmax: i64,
    offsets: &[f64],
    chis: &[f64],
    grid: usize,
) -> Result<f64> {
    let n = set.n();
    let big_n = set.n_bound().max(1) as f64;
    let mut worst: f64 = 0.0;
    for k in l1_ball(n, kmax) {
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let k1: i64 = k.iter().map(|x| x.abs()).sum();
        for &c in offsets {
            for &chi in chis {
                let est = nrom_excluded_bound(set, &k, c, chi, grid)?;
                let shape = big_n.powi(2 * (n * n) as i32) * chi.powf(1.0 / n as f64) / k1 as f64;
                worst = worst.max(est.sampled_measure / shape);
            }
        }
    }
    Ok(worst)
}

/// All integer vectors of length `n` with `|k|₁ ≤ radius`, in lexicographic
/// order.
pub fn l1_ball(n: usize, radius: i64) -> Vec<Vec<i64>> {
    fn rec(n: usize, left: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in -left..=left {
            prefix.push(v);
            rec(n, left - v.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, radius.max(0), &mut Vec::with_capacity(n), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mass(m: f64) -> Mass {
        Mass::new(m).unwrap()
    }

    #[test]
    fn mass_range() {
        assert!(Mass::new(0.99).is_err());
        assert!(Mass::new(2.01).is_err());
        assert!(Mass::new(f64::NAN).is_err());
        assert_eq!(Mass::new(1.5).unwrap().value(), 1.5);
    }

    #[test]
    fn frequency_examples() {
        assert_eq!(frequency(0, mass(1.0)), 1.0);
        assert!((frequency(1, mass(1.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(frequency(-7, mass(1.5)), frequency(7, mass(1.5)));
    }

    // Richardson-extrapolated centred differences of order j.
    fn fd_derivative(a: i64, m: f64, j: u32) -> f64 {
        let f = |x: f64| ((a * a) as f64 + x).sqrt();
        let raw = |h: f64| -> f64 {
            // j-th centred difference: Σ (−1)^i C(j,i) f(x + (j/2 − i) h) / h^j
            let mut s = 0.0;
            let mut binom = 1.0;
            for i in 0..=j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * binom * f(m + (j as f64 / 2.0 - i as f64) * h);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
            s / h.powi(j as i32)
        };
        let x = (a * a) as f64 + m;
        let h = x * match j {
            1 => 1e-4,
            2 => 1e-3,
            3 => 5e-3,
            _ => 1e-2,
        };
        (4.0 * raw(h / 2.0) - raw(h)) / 3.0
    }

    #[test]
    fn derivative_examples() {
        assert!((frequency_derivative(0, mass(1.0), 1).unwrap() - 0.5).abs() < 1e-15);
        let d2 = frequency_derivative(1, mass(1.0), 2).unwrap();
        assert!((d2 + 1.0 / (4.0 * 2f64.powf(1.5))).abs() < 1e-15);
        assert!((d2 - fd_derivative(1, 1.0, 2)).abs() < 1e-6 * d2.abs());
        let d3 = frequency_derivative(3, mass(2.0), 3).unwrap();
        assert!((d3 - fd_derivative(3, 2.0, 3)).abs() < 1e-5 * d3.abs());
        assert!(frequency_derivative(0, mass(1.0), 0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for a in -10..=10 {
            for &m in &[1.0, 1.37, 2.0] {
                for j in 1..=4 {
                    let exact = frequency_derivative(a, mass(m), j).unwrap();
                    let fd = fd_derivative(a, m, j);
                    assert!(
                        (exact - fd).abs() <= 1e-5 * exact.abs(),
                        "a={a} m={m} j={j}: {exact} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_overflow_is_reported() {
        assert!(matches!(
            frequency_derivative(0, mass(1.0), 400),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn admissibility() {
        assert!(is_admissible(&[0, 1, 2]).unwrap());
        assert!(!is_admissible(&[1, -1]).unwrap());
        assert!(is_admissible(&[0]).unwrap());
        assert_eq!(admissibility_witness(&[1, -1]).unwrap(), Some(1));
        assert_eq!(is_admissible(&[2, 2]), Err(Error::DuplicateMode(2)));
        assert!(AdmissibleSet::new(&[3, -3]).is_err());
        let raw = AdmissibleSet::new_unchecked(&[1, -1]).unwrap();
        assert!(!raw.is_admissible());
    }

    #[test]
    fn derived_sets() {
        let a = AdmissibleSet::new(&[5, 0, 1]).unwrap();
        assert_eq!(a.modes(), &[0, 1, 5]);
        assert_eq!(a.n(), 3);
        assert_eq!(a.n_bound(), 5);
        assert!(a.in_mirror(-1) && a.in_mirror(-5));
        assert!(!a.in_mirror(0) && !a.in_mirror(1));
        assert!(a.in_far_normal(2) && !a.in_far_normal(-5));
        assert_eq!(a.normal_modes(2), vec![-2, -1, 2]);
        assert_eq!(a.position(5), Some(2));
    }

    #[test]
    fn vandermonde_examples() {
        assert!((vandermonde_determinant(&[0], mass(1.0)).unwrap() - 0.5).abs() < 1e-15);
        // Naive 2x2 expansion versus the product formula.
        let m = mass(1.0);
        let d = |a, j| frequency_derivative(a, m, j).unwrap();
        let naive = d(0, 1) * d(1, 2) - d(1, 1) * d(0, 2);
        let closed = vandermonde_product(&[0, 1], m).unwrap();
        assert!((naive - closed).abs() <= 1e-12 * naive.abs());
        assert!(vandermonde_determinant(&[], m).is_err());
        assert!(vandermonde_determinant(&[1, 1], m).is_err());
    }

    #[test]
    fn vandermonde_vanishes_on_mirror_pairs() {
        let m = mass(1.5);
        assert_eq!(vandermonde_product(&[2, -2, 5], m).unwrap(), 0.0);
        let direct = vandermonde_determinant(&[2, -2, 5], m).unwrap();
        assert!(direct.abs() <= 1e-14 * vandermonde_scale(&[2, -2, 5], m).unwrap());
    }

    #[test]
    fn volume_pick_examples() {
        let r = volume_pick(&[vec![2.0, 0.0]], &[4.0, 0.0], None).unwrap();
        assert_eq!(r.index, 0);
        assert!((r.value - 8.0).abs() < 1e-12 && (r.bound - 8.0).abs() < 1e-12);

        let r = volume_pick(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, 4.0], None).unwrap();
        assert_eq!(r.index, 1);
        assert!((r.value - 4.0).abs() < 1e-12);
        assert!((r.bound - 2.5).abs() < 1e-12);

        let r = volume_pick(&[vec![1.0, 1.0], vec![1.0, -1.0]], &[1.0, 0.0], Some(2.0)).unwrap();
        assert!(r.value >= r.bound);

        assert!(volume_pick(&[vec![1.0, 1.0], vec![2.0, 2.0]], &[1.0, 1.0], None).is_err());
        assert!(matches!(
            volume_pick(&[vec![1.0, 0.0, 0.0]], &[0.0, 1.0, 0.0], None),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sublevel_examples() {
        let e = sublevel_measure(|_| 1.0, 0.5, 3, 1.0, 1000).unwrap();
        assert_eq!(e.sampled_measure, 0.0);
        let e = sublevel_measure(|m| m - 1.5, 0.1, 1, 1.0, 100_000).unwrap();
        assert!((e.sampled_measure - 0.2).abs() < 2e-5);
        assert!((e.analytic_bound - 0.2).abs() < 1e-15);
        assert!(sublevel_measure(|m| 1.0 / (m - 1.5), 0.1, 1, 1.0, 3).is_err());
        assert!(sublevel_measure(|_| 1.0, 0.0, 1, 1.0, 10).is_err());
    }

    #[test]
    fn nrom_examples() {
        let a0 = AdmissibleSet::new(&[0]).unwrap();
        let e = nrom_excluded_bound(&a0, &[1], 0.0, 0.5, 10_000).unwrap();
        assert_eq!(e.sampled_measure, 0.0);
        assert!(nrom_excluded_bound(&a0, &[0], 0.0, 0.5, 100).is_err());

        let a01 = AdmissibleSet::new(&[0, 1]).unwrap();
        let e = nrom_excluded_bound(&a01, &[1, -1], 0.0, 1e-4, 1_000_000).unwrap();
        assert!(e.sampled_measure <= e.analytic_bound);
    }

    #[test]
    fn l1_ball_counts() {
        assert_eq!(l1_ball(1, 3).len(), 7);
        assert_eq!(l1_ball(2, 1).len(), 5);
        assert_eq!(l1_ball(3, 2).len(), 25);
        assert!(l1_ball(2, 2).iter().all(|k| k.iter().map(|x| x.abs()).sum::<i64>() <= 2));
    }
}
