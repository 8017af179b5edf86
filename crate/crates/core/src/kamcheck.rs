//! Finite-resolution checks of the frequency hypotheses used by the KAM
//! step: separation (A1), transversality (A2) and the second Melnikov
//! condition (A3), all stated for the rescaled frequencies
//! `Ω(ρ) = ω + νMρ` and `Λ_a(ρ)` on `ρ ∈ 𝒟 = [1,2]ⁿ`.
//!
//! Every divisor is affine in `ρ`, so "for all `ρ ∈ 𝒟`" statements are
//! decided exactly from the `2ⁿ` corners of the box: the minimum of `|f|`
//! is zero when the corner values change sign and the smallest corner
//! value otherwise.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::birkhoff::RescaledNormalForm;
use crate::error::{Error, Result};
use crate::smalldiv::{classify_resonant, DivisorKind, DivisorQuery};
use crate::spectrum::{l1_ball, AdmissibleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    A1,
    A2,
    A3,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One offending tuple with the value that failed and the bound it missed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    pub kind: Option<DivisorKind>,
    pub k: Vec<i64>,
    pub a: Option<i64>,
    pub b: Option<i64>,
    pub rho: Vec<f64>,
    pub value: f64,
    pub required: f64,
    /// Which inequality failed (`lower`, `separation`, `value`, `derivative`).
    pub branch: String,
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Violation {
    /// `hyp=<..> k=<..> a=<..> b=<..> rho=<..> value=<..> required=<..> kind=<..>`.
    pub fn record_line(&self) -> String {
        let opt = |s: Option<i64>| s.map_or("-".to_string(), |v| v.to_string());
        let kind = self.kind.map_or("-".to_string(), |k| k.to_string());
        format!(
            "hyp={} k={} a={} b={} rho={} value={:e} required={:e} kind={}",
            self.hypothesis,
            join(&self.k),
            opt(self.a),
            opt(self.b),
            join(&self.rho),
            self.value,
            self.required,
            kind
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hypothesis: Hypothesis,
    pub parameters: BTreeMap<String, f64>,
    pub checked_count: usize,
    pub violations: Vec<Violation>,
    /// Fraction of accepted grid points (A3 only).
    pub accepted_fraction: Option<f64>,
    pub verified: bool,
    /// How many tuples each branch certified (A2 only).
    pub branches: BTreeMap<String, usize>,
}

impl HypothesisReport {
    fn finish(
        hypothesis: Hypothesis,
        parameters: BTreeMap<String, f64>,
        checked_count: usize,
        violations: Vec<Violation>,
        accepted_fraction: Option<f64>,
        branches: BTreeMap<String, usize>,
    ) -> Self {
        HypothesisReport {
            hypothesis,
            parameters,
            checked_count,
            verified: violations.is_empty(),
            violations,
            accepted_fraction,
            branches,
        }
    }

    /// One [`Violation::record_line`] per line.
    pub fn violation_records(&self) -> String {
        self.violations.iter().map(|v| v.record_line() + "\n").collect()
    }
}

/// `g` points per dimension on `[1,2]`, endpoints included; `g = 1` gives
/// the midpoint.
pub fn rho_lattice(n: usize, g: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = match g {
        0 => Vec::new(),
        1 => vec![1.5],
        _ => (0..g).map(|i| 1.0 + i as f64 / (g - 1) as f64).collect(),
    };
    product(n, &axis)
}

/// Cell centres of a `g`-per-dimension partition of `[1,2]ⁿ`.
pub fn rho_cells(n: usize, g: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..g).map(|i| 1.0 + (i as f64 + 0.5) / g as f64).collect();
    product(n, &axis)
}

fn product(n: usize, axis: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

fn corners(n: usize) -> Vec<Vec<f64>> {
    rho_lattice(n, 2)
}

fn dot(k: &[i64], w: &[f64]) -> f64 {
    k.iter().zip(w).map(|(&ki, &x)| ki as f64 * x).sum()
}

fn combine(kind: DivisorKind, kdot: f64, la: f64, lb: f64) -> f64 {
    match kind {
        DivisorKind::D0 => kdot,
        DivisorKind::D1 => kdot + la,
        DivisorKind::D2 => kdot + la + lb,
        DivisorKind::D3 => kdot + la - lb,
    }
}

/// `k·Ω(ρ)`, `k·Ω + Λ_a`, `k·Ω + Λ_a + Λ_b` or `k·Ω + Λ_a − Λ_b`.
pub fn rescaled_divisor(rnf: &RescaledNormalForm, q: &DivisorQuery, rho: &[f64]) -> f64 {
    let omega = rnf.omega_at(rho);
    let la = q.a.map_or(0.0, |a| rnf.lambda_at(a, rho));
    let lb = q.b.map_or(0.0, |b| rnf.lambda_at(b, rho));
    combine(q.kind, dot(&q.k, &omega), la, lb)
}

/// `∂_ρ` of [`rescaled_divisor`], constant on `𝒟`.
pub fn rescaled_divisor_gradient(rnf: &RescaledNormalForm, q: &DivisorQuery) -> Vec<f64> {
    let k = DVector::from_iterator(q.k.len(), q.k.iter().map(|&x| x as f64));
    let mut g: Vec<f64> = (&rnf.m * k).iter().map(|x| rnf.nu * x).collect();
    let sign_b = if q.kind == DivisorKind::D3 { -1.0 } else { 1.0 };
    for (s, sign) in [(q.a, 1.0), (q.b, sign_b)] {
        if let Some(s) = s {
            for (gi, di) in g.iter_mut().zip(rnf.lambda_gradient(s)) {
                *gi += sign * di;
            }
        }
    }
    g
}

/// Smallest `|f|` over `𝒟` for an affine `f`, with the corner attaining the
/// smallest corner value.
fn box_min(rnf: &RescaledNormalForm, q: &DivisorQuery) -> (f64, Vec<f64>, f64) {
    let mut best: Option<(f64, Vec<f64>)> = None;
    let (mut pos, mut neg) = (false, false);
    for c in corners(q.k.len()) {
        let v = rescaled_divisor(rnf, q, &c);
        pos |= v > 0.0;
        neg |= v < 0.0;
        if best.as_ref().is_none_or(|(b, _)| v.abs() < b.abs()) {
            best = Some((v, c));
        }
    }
    let (v, c) = best.expect("at least one corner");
    let min = if pos && neg { 0.0 } else { v.abs() };
    (min, c, v)
}

/// `‖M⁻¹‖₂`.
pub fn inverse_norm(rnf: &RescaledNormalForm) -> Result<f64> {
    let inv = rnf
        .m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("modulation matrix is singular".into()))?;
    Ok(inv.singular_values().max())
}

/// Normal modes with `|s| ≤ cutoff`.
fn normal_modes(set: &AdmissibleSet, cutoff: i64) -> Vec<i64> {
    set.normal_modes(cutoff)
}

/// Separation: `Λ_a ≥ ⟨a⟩` and `|Λ_a − Λ_b| ≥ (1/8)||a| − |b||` for normal
/// `|a|, |b| ≤ S`, over `rho_grid` points per dimension (endpoints
/// included, so `rho_grid ≥ 2` contains the corners and is exact).
pub fn check_a1(rnf: &RescaledNormalForm, s_cut: i64, rho_grid: usize) -> HypothesisReport {
    let set = rnf.fs.set();
    // Λ depends on |a| only; keep one normal representative per |a|.
    let reps: Vec<i64> = (0..=s_cut)
        .filter_map(|p| [p, -p].into_iter().find(|&s| set.is_normal(s)))
        .collect();
    let k0 = vec![0; set.n()];
    let points = rho_lattice(set.n(), rho_grid);
    let per_point: Vec<(usize, Vec<Violation>)> = points
        .par_iter()
        .map(|rho| {
            let lam: Vec<f64> = reps.iter().map(|&s| rnf.lambda_at(s, rho)).collect();
            let mut out = Vec::new();
            let mut checked = 0;
            for (i, &a) in reps.iter().enumerate() {
                checked += 1;
                let lower = a.abs().max(1) as f64;
                if lam[i] < lower {
                    out.push(Violation {
                        hypothesis: Hypothesis::A1,
                        kind: None,
                        k: k0.clone(),
                        a: Some(a),
                        b: None,
                        rho: rho.clone(),
                        value: lam[i],
                        required: lower,
                        branch: "lower".into(),
                    });
                }
                for (j, &b) in reps.iter().enumerate().skip(i + 1) {
                    checked += 1;
                    let gap = lam[j] - lam[i];
                    let req = (b.abs() - a.abs()).abs() as f64 / 8.0;
                    if gap.abs() < req {
                        out.push(Violation {
                            hypothesis: Hypothesis::A1,
                            kind: Some(DivisorKind::D3),
                            k: k0.clone(),
                            a: Some(b),
                            b: Some(a),
                            rho: rho.clone(),
                            value: gap,
                            required: req,
                            branch: "separation".into(),
                        });
                    }
                }
            }
            (checked, out)
        })
        .collect();
    let checked = per_point.iter().map(|p| p.0).sum();
    let violations = per_point.into_iter().flat_map(|p| p.1).collect();
    let mut params = base_params(rnf);
    params.insert("S".into(), s_cut as f64);
    params.insert("rho_grid".into(), rho_grid as f64);
    params.insert("c0".into(), 1.0);
    params.insert("c1".into(), 0.125);
    HypothesisReport::finish(Hypothesis::A1, params, checked, violations, None, BTreeMap::new())
}

fn base_params(rnf: &RescaledNormalForm) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::new();
    p.insert("nu".into(), rnf.nu);
    p.insert("n".into(), rnf.fs.set().n() as f64);
    p.insert("mass".into(), rnf.fs.mass().value());
    p.insert("within_validity".into(), if rnf.within_validity() { 1.0 } else { 0.0 });
    p
}

/// Thresholds of the transversality check. `None` fields take the
/// ν-dependent defaults described on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityConfig {
    /// Value threshold for `k·Ω` at small `k`; default `ν^{1/2}`.
    pub kappa_small: Option<f64>,
    /// Value threshold per unit weight for `D1`–`D3` at small `k`;
    /// default `ν^{2/3}`.
    pub delta_small: Option<f64>,
    /// Derivative threshold, and value threshold at large `k`; default `ν`.
    pub delta: Option<f64>,
    /// Size of the `C¹` ball around `Ω`; default `½ν‖M⁻¹‖₂⁻¹`.
    pub delta0: Option<f64>,
    /// Constant of the lower bound for resonant patterns, in units of `ν`.
    pub breve_c: f64,
    /// `|k|₁` cutoff `N`.
    pub kmax: i64,
    /// Mode cutoff `S`.
    pub s_cut: i64,
    /// Small-`k` range is `|k|₁ ≤ ν^{−γ}`.
    pub gamma: f64,
}

impl TransversalityConfig {
    pub fn new(kmax: i64, s_cut: i64, gamma: f64) -> Self {
        TransversalityConfig {
            kappa_small: None,
            delta_small: None,
            delta: None,
            delta0: None,
            breve_c: 0.05,
            kmax,
            s_cut,
            gamma,
        }
    }
}

struct Thresholds {
    kappa_small: f64,
    delta_small: f64,
    delta: f64,
    delta0: f64,
    breve: f64,
    small_k: f64,
}

enum Verdict {
    Certified(&'static str),
    Failed(Violation),
}

fn judge(rnf: &RescaledNormalForm, q: &DivisorQuery, set: &AdmissibleSet, t: &Thresholds) -> Verdict {
    let l1 = q.k_l1() as f64;
    let margin = t.delta0 * l1;
    let w = q.weight();
    let resonant = classify_resonant(q, set);
    let (value_req, value_branch) = if resonant {
        (t.breve * w + margin, "resonant_value")
    } else if l1 <= t.small_k {
        let base = if q.kind == DivisorKind::D0 { t.kappa_small } else { t.delta_small * w };
        (base + margin, "value")
    } else {
        (t.delta * w + margin, "value")
    };
    let derivative = || {
        if q.k.iter().all(|&x| x == 0) {
            return None;
        }
        let k = DVector::from_iterator(q.k.len(), q.k.iter().map(|&x| x as f64));
        let mk = &rnf.m * k;
        let norm = mk.norm();
        if norm == 0.0 {
            return None;
        }
        let g = rescaled_divisor_gradient(rnf, q);
        Some(g.iter().zip(mk.iter()).map(|(gi, zi)| gi * zi / norm).sum::<f64>())
    };
    let derivative_req = t.delta + margin;
    // Large non-resonant k: the derivative branch is the primary one.
    if !resonant && l1 > t.small_k {
        if let Some(d) = derivative() {
            if d.abs() >= derivative_req {
                return Verdict::Certified("derivative");
            }
        }
    }
    let (min, corner, corner_value) = box_min(rnf, q);
    if min >= value_req {
        return Verdict::Certified(value_branch);
    }
    if resonant || l1 <= t.small_k {
        if let Some(d) = derivative() {
            if d.abs() >= derivative_req {
                return Verdict::Certified("derivative");
            }
        }
    }
    Verdict::Failed(Violation {
        hypothesis: Hypothesis::A2,
        kind: Some(q.kind),
        k: q.k.clone(),
        a: q.a,
        b: q.b,
        rho: corner,
        value: corner_value,
        required: value_req,
        branch: value_branch.into(),
    })
}

/// Transversality over `0 < |k|₁ ≤ N` (and `k = 0` for `D3`), normal
/// `|a|, |b| ≤ S`.
///
/// Each tuple is certified by a value bound over all of `𝒟` or by the
/// derivative bound `|⟨∂_ρ f, z_k⟩| ≥ δ` with `z_k = Mk/|Mk|`; both carry the
/// margin `δ₀|k|₁` so that the verdict holds for every `Ω′` in the `C¹`
/// ball of radius `δ₀`. Resonant patterns are held to `breve_c·ν·weight`.
pub fn check_transversality(rnf: &RescaledNormalForm, cfg: &TransversalityConfig) -> Result<HypothesisReport> {
    let set = rnf.fs.set();
    let nu = rnf.nu;
    let c_inv = inverse_norm(rnf)?;
    let t = Thresholds {
        kappa_small: cfg.kappa_small.unwrap_or(nu.sqrt()),
        delta_small: cfg.delta_small.unwrap_or(nu.powf(2.0 / 3.0)),
        delta: cfg.delta.unwrap_or(nu),
        delta0: cfg.delta0.unwrap_or(0.5 * nu / c_inv),
        breve: cfg.breve_c * nu,
        small_k: nu.powf(-cfg.gamma),
    };
    let normal = normal_modes(set, cfg.s_cut);
    let ks = l1_ball(set.n(), cfg.kmax);
    let per_k: Vec<(usize, BTreeMap<String, usize>, Vec<Violation>)> = ks
        .par_iter()
        .map(|k| {
            let mut checked = 0;
            let mut branches = BTreeMap::new();
            let mut bad = Vec::new();
            let zero = k.iter().all(|&x| x == 0);
            let mut visit = |q: DivisorQuery| {
                checked += 1;
                match judge(rnf, &q, set, &t) {
                    Verdict::Certified(b) => *branches.entry(b.to_string()).or_insert(0) += 1,
                    Verdict::Failed(v) => bad.push(v),
                }
            };
            if !zero {
                visit(DivisorQuery::d0(k.clone()));
                for (i, &a) in normal.iter().enumerate() {
                    visit(DivisorQuery::d1(k.clone(), a));
                    for &b in &normal[i..] {
                        visit(DivisorQuery::d2(k.clone(), a, b));
                    }
                }
            }
            for &a in &normal {
                for &b in &normal {
                    if a.abs() > b.abs() {
                        visit(DivisorQuery::d3(k.clone(), a, b));
                    }
                }
            }
            (checked, branches, bad)
        })
        .collect();
    let mut checked = 0;
    let mut branches = BTreeMap::new();
    let mut violations = Vec::new();
    for (c, b, v) in per_k {
        checked += c;
        for (name, count) in b {
            *branches.entry(name).or_insert(0) += count;
        }
        violations.extend(v);
    }
    let mut params = base_params(rnf);
    params.insert("kappa_small".into(), t.kappa_small);
    params.insert("delta_small".into(), t.delta_small);
    params.insert("delta".into(), t.delta);
    params.insert("delta0".into(), t.delta0);
    params.insert("breve_c".into(), cfg.breve_c);
    params.insert("N".into(), cfg.kmax as f64);
    params.insert("S".into(), cfg.s_cut as f64);
    params.insert("gamma_exponent".into(), cfg.gamma);
    params.insert("small_k_radius".into(), t.small_k);
    params.insert("inverse_norm".into(), c_inv);
    Ok(HypothesisReport::finish(Hypothesis::A2, params, checked, violations, None, branches))
}

/// Per-point acceptance of the second Melnikov condition
/// `|k·Ω(ρ) + Λ_a(ρ) − Λ_b(ρ)| ≥ κ(1 + ||a| − |b||)` for `0 < |k|₁ ≤ N` and
/// normal `|a| ≠ |b| ≤ S`, with the first offending tuple of each rejected
/// point.
pub fn melnikov_mask(
    rnf: &RescaledNormalForm,
    kappa: f64,
    kmax: i64,
    s_cut: i64,
    points: &[Vec<f64>],
) -> Vec<Option<Violation>> {
    let set = rnf.fs.set();
    let reps: Vec<i64> = (0..=s_cut)
        .filter_map(|p| [p, -p].into_iter().find(|&s| set.is_normal(s)))
        .collect();
    let ks: Vec<Vec<i64>> = l1_ball(set.n(), kmax).into_iter().filter(|k| k.iter().any(|&x| x != 0)).collect();
    points
        .par_iter()
        .map(|rho| {
            let omega = rnf.omega_at(rho);
            let lam: Vec<f64> = reps.iter().map(|&s| rnf.lambda_at(s, rho)).collect();
            // Λ is increasing in |a|, so for each (k, a) only the b with Λ_b
            // close to k·Ω + Λ_a can violate; locate them by bisection.
            let window = kappa * (1.0 + 2.0 * s_cut as f64) + 1e-12;
            for k in &ks {
                let kdot = dot(k, &omega);
                for (i, &a) in reps.iter().enumerate() {
                    let target = kdot + lam[i];
                    let lo = lam.partition_point(|&x| x < target - window);
                    let hi = lam.partition_point(|&x| x <= target + window);
                    for j in lo..hi {
                        let b = reps[j];
                        if a.abs() == b.abs() {
                            continue;
                        }
                        let v = combine(DivisorKind::D3, kdot, lam[i], lam[j]);
                        let req = kappa * (1.0 + (a.abs() - b.abs()).abs() as f64);
                        if v.abs() < req {
                            return Some(Violation {
                                hypothesis: Hypothesis::A3,
                                kind: Some(DivisorKind::D3),
                                k: k.clone(),
                                a: Some(a),
                                b: Some(b),
                                rho: rho.clone(),
                                value: v,
                                required: req,
                                branch: "value".into(),
                            });
                        }
                    }
                }
            }
            None
        })
        .collect()
}

/// Grid resolution used when none is given: 100 per dimension for `n ≤ 2`,
/// 30 for `n = 3`, 12 for `n = 4`.
pub fn default_rho_grid(n: usize) -> usize {
    match n {
        0..=2 => 100,
        3 => 30,
        _ => 12,
    }
}

/// Refuses `n > 4` unless forced.
pub fn check_dimension(n: usize, force: bool) -> Result<()> {
    if n > 4 && !force {
        return Err(Error::Precondition(format!(
            "ρ-grid scans in dimension {n} > 4 require an explicit override"
        )));
    }
    Ok(())
}

/// Second Melnikov condition over the cell centres of a `rho_grid`-per-axis
/// partition of `𝒟`. Reports the accepted fraction and the bound shape
/// `N^{n+3/2+2/(3γ)} (κ̃ ν^{−7/5})^{1/2}` with `κ̃ = κ/(1 + 16‖M⁻¹‖₂N)`.
pub fn melnikov_scan(
    rnf: &RescaledNormalForm,
    kappa: f64,
    kmax: i64,
    s_cut: i64,
    rho_grid: usize,
    gamma: f64,
) -> Result<HypothesisReport> {
    let n = rnf.fs.set().n();
    let points = rho_cells(n, rho_grid);
    let mask = melnikov_mask(rnf, kappa, kmax, s_cut, &points);
    let rejected: Vec<Violation> = mask.into_iter().flatten().collect();
    let total = points.len();
    let fraction = if total == 0 { 1.0 } else { (total - rejected.len()) as f64 / total as f64 };
    let c_inv = inverse_norm(rnf)?;
    let nu = rnf.nu;
    let kappa_tilde = kappa / (1.0 + 16.0 * c_inv * kmax as f64);
    let expo = n as f64 + 1.5 + 2.0 / (3.0 * gamma);
    let mut params = base_params(rnf);
    params.insert("kappa".into(), kappa);
    params.insert("delta".into(), nu);
    params.insert("N".into(), kmax as f64);
    params.insert("S".into(), s_cut as f64);
    params.insert("rho_grid".into(), rho_grid as f64);
    params.insert("gamma_exponent".into(), gamma);
    params.insert("kappa_below_delta".into(), if kappa > 0.0 && kappa < nu { 1.0 } else { 0.0 });
    params.insert("bound_shape".into(), (kmax as f64).powf(expo) * (kappa_tilde * nu.powf(-1.4)).sqrt());
    params.insert("excluded_fraction".into(), 1.0 - fraction);
    Ok(HypothesisReport::finish(Hypothesis::A3, params, total, rejected, Some(fraction), BTreeMap::new()))
}

/// `(κ, accepted_fraction)` for each κ.
pub fn kappa_sweep(
    rnf: &RescaledNormalForm,
    kappas: &[f64],
    kmax: i64,
    s_cut: i64,
    rho_grid: usize,
) -> Vec<(f64, f64)> {
    let n = rnf.fs.set().n();
    let points = rho_cells(n, rho_grid);
    kappas
        .iter()
        .map(|&kappa| {
            let mask = melnikov_mask(rnf, kappa, kmax, s_cut, &points);
            let ok = mask.iter().filter(|v| v.is_none()).count();
            (kappa, ok as f64 / points.len().max(1) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birkhoff::{rescale, solve_homological, NormalFormConfig};
    use crate::polyham::build_p4;
    use crate::spectrum::{FrequencySystem, Mass};

    fn rnf(m: f64, modes: &[i64], nu: f64) -> RescaledNormalForm {
        let fs = FrequencySystem::new(Mass::new(m).unwrap(), AdmissibleSet::new(modes).unwrap());
        let nf = solve_homological(&build_p4(4, &fs), &fs, &NormalFormConfig::default()).unwrap();
        let rho = vec![1.5; modes.len()];
        rescale(&nf, &fs, nu, &rho).unwrap()
    }

    #[test]
    fn grids() {
        assert_eq!(rho_lattice(2, 2).len(), 4);
        assert_eq!(rho_lattice(1, 1), vec![vec![1.5]]);
        assert_eq!(rho_cells(1, 2), vec![vec![1.25], vec![1.75]]);
        assert_eq!(rho_cells(3, 4).len(), 64);
    }

    #[test]
    fn a1_small_nu_clean_large_nu_violates() {
        let r = rnf(1.0, &[1], 1e-3);
        let rep = check_a1(&r, 100, 2);
        assert!(rep.verified, "{}", rep.violation_records());
        let big = rnf(1.0, &[1], 10.0);
        let rep = check_a1(&big, 20, 2);
        assert!(!rep.verified);
        assert!(rep.violations[0].record_line().starts_with("hyp=A1 k=0 "));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let r = rnf(1.3, &[1, 2], 1e-3);
        let q = DivisorQuery::d3(vec![2, -1], 5, -3);
        let g = rescaled_divisor_gradient(&r, &q);
        for i in 0..2 {
            let mut p = vec![1.4, 1.6];
            let f0 = rescaled_divisor(&r, &q, &p);
            p[i] += 0.1;
            let f1 = rescaled_divisor(&r, &q, &p);
            assert!(((f1 - f0) / 0.1 - g[i]).abs() < 1e-12);
        }
        // D0 gradient is ν M k and its projection on Mk/|Mk| is ν|Mk|.
        let q0 = DivisorQuery::d0(vec![3, 1]);
        let g0 = rescaled_divisor_gradient(&r, &q0);
        let mk = &r.m * DVector::from_vec(vec![3.0, 1.0]);
        let proj: f64 = g0.iter().zip(mk.iter()).map(|(g, z)| g * z / mk.norm()).sum();
        assert!((proj - r.nu * mk.norm()).abs() < 1e-15);
    }

    #[test]
    fn resonant_d1_value_has_closed_form() {
        let r = rnf(1.3, &[1], 1e-3);
        let q = DivisorQuery::d1(vec![-1], -1);
        let lam = r.fs.lambda(1);
        for rho in [1.0, 1.5, 2.0] {
            let v = rescaled_divisor(&r, &q, &[rho]);
            let want = r.nu * 1.5 / std::f64::consts::PI / lam * (rho / lam);
            assert!((v.abs() - want).abs() < 1e-15, "{v} {want}");
        }
    }

    #[test]
    fn transversality_generic_mass() {
        let r = rnf(1.3, &[1], 1e-4);
        let rep = check_transversality(&r, &TransversalityConfig::new(20, 60, 0.1)).unwrap();
        assert!(rep.verified, "{}", rep.violation_records());
        assert!(rep.checked_count > 0);
        assert_eq!(rep.branches.values().sum::<usize>(), rep.checked_count);
    }

    #[test]
    fn melnikov_defaults_and_monotonicity() {
        let r = rnf(1.3, &[1], 1e-3);
        let base = melnikov_scan(&r, 1e-6, 10, 40, 100, 0.1).unwrap();
        let f = base.accepted_fraction.unwrap();
        assert!(f >= 0.99, "{f}");
        let k10 = melnikov_scan(&r, 1e-5, 10, 40, 100, 0.1).unwrap().accepted_fraction.unwrap();
        let n20 = melnikov_scan(&r, 1e-6, 20, 40, 100, 0.1).unwrap().accepted_fraction.unwrap();
        assert!(k10 <= f && n20 <= f);
        let sweep = kappa_sweep(&r, &[0.0, 1e-4, 1e-2, 1e-1], 10, 40, 50);
        assert_eq!(sweep[0].1, 1.0);
        assert!(sweep.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn melnikov_violations_reproduce() {
        let r = rnf(1.3, &[1], 1e-3);
        let rep = melnikov_scan(&r, 1e-2, 10, 40, 50, 0.1).unwrap();
        assert!(!rep.violations.is_empty());
        for v in &rep.violations {
            let q = DivisorQuery::d3(v.k.clone(), v.a.unwrap(), v.b.unwrap());
            assert_eq!(rescaled_divisor(&r, &q, &v.rho).to_bits(), v.value.to_bits());
        }
    }

    #[test]
    fn dimension_gate() {
        assert!(check_dimension(5, false).is_err());
        assert!(check_dimension(5, true).is_ok());
        assert!(check_dimension(4, false).is_ok());
    }
}
