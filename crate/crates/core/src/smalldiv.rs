//! Small divisors `ω·k`, `ω·k + λ_a`, `ω·k + λ_a + λ_b`, `ω·k + λ_a − λ_b`:
//! evaluation, resonance classification, and finite-resolution lower-bound
//! scans.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{self, Interval};
use crate::spectrum::{l1_ball, mass_grid, AdmissibleSet, FrequencySystem, Mass, MeasureEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DivisorKind {
    D0,
    D1,
    D2,
    D3,
}

impl fmt::Display for DivisorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One small divisor: a kind, a lattice vector over the tangential modes, and
/// up to two normal modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorQuery {
    pub kind: DivisorKind,
    pub k: Vec<i64>,
    pub a: Option<i64>,
    pub b: Option<i64>,
}

impl DivisorQuery {
    pub fn d0(k: Vec<i64>) -> Self {
        DivisorQuery { kind: DivisorKind::D0, k, a: None, b: None }
    }
    pub fn d1(k: Vec<i64>, a: i64) -> Self {
        DivisorQuery { kind: DivisorKind::D1, k, a: Some(a), b: None }
    }
    pub fn d2(k: Vec<i64>, a: i64, b: i64) -> Self {
        DivisorQuery { kind: DivisorKind::D2, k, a: Some(a), b: Some(b) }
    }
    pub fn d3(k: Vec<i64>, a: i64, b: i64) -> Self {
        DivisorQuery { kind: DivisorKind::D3, k, a: Some(a), b: Some(b) }
    }

    /// Checks the shape of the query against its kind and the mode set.
    pub fn validate(&self, set: &AdmissibleSet) -> Result<()> {
        if self.k.len() != set.n() {
            return Err(Error::InvalidInput(format!(
                "k has length {}, expected {}",
                self.k.len(),
                set.n()
            )));
        }
        let shape_ok = match self.kind {
            DivisorKind::D0 => self.a.is_none() && self.b.is_none(),
            DivisorKind::D1 => self.a.is_some() && self.b.is_none(),
            DivisorKind::D2 | DivisorKind::D3 => self.a.is_some() && self.b.is_some(),
        };
        if !shape_ok {
            return Err(Error::InvalidInput(format!("malformed {} query", self.kind)));
        }
        for s in [self.a, self.b].into_iter().flatten() {
            if set.contains(s) {
                return Err(Error::TangentialMode(s));
            }
        }
        Ok(())
    }

    /// `1`, `⟨a⟩`, `⟨a⟩ + ⟨b⟩`, or `1 + ||a| − |b||` depending on the kind.
    pub fn weight(&self) -> f64 {
        let br = |s: Option<i64>| s.map_or(1, |s| s.abs().max(1)) as f64;
        match self.kind {
            DivisorKind::D0 => 1.0,
            DivisorKind::D1 => br(self.a),
            DivisorKind::D2 => br(self.a) + br(self.b),
            DivisorKind::D3 => {
                let (a, b) = (self.a.unwrap_or(0), self.b.unwrap_or(0));
                1.0 + (a.abs() - b.abs()).abs() as f64
            }
        }
    }

    pub fn k_l1(&self) -> i64 {
        self.k.iter().map(|x| x.abs()).sum()
    }
}

fn omega_dot(k: &[i64], omega: &[f64]) -> f64 {
    k.iter().zip(omega).map(|(&ki, &w)| ki as f64 * w).sum()
}

fn combine(kind: DivisorKind, base: f64, la: f64, lb: f64) -> f64 {
    match kind {
        DivisorKind::D0 => base,
        DivisorKind::D1 => base + la,
        DivisorKind::D2 => base + la + lb,
        DivisorKind::D3 => base + la - lb,
    }
}

/// Signed divisor value at the mass carried by `fs`.
pub fn evaluate_divisor(q: &DivisorQuery, fs: &FrequencySystem) -> Result<f64> {
    q.validate(fs.set())?;
    let omega = fs.omega();
    let la = q.a.map_or(0.0, |a| fs.lambda(a));
    let lb = q.b.map_or(0.0, |b| fs.lambda(b));
    Ok(combine(q.kind, omega_dot(&q.k, &omega), la, lb))
}

/// Enclosure of the divisor value with outward rounding.
pub fn evaluate_divisor_interval(q: &DivisorQuery, fs: &FrequencySystem) -> Result<Interval> {
    q.validate(fs.set())?;
    let m = fs.mass().value();
    let mut acc = Interval::point(0.0);
    for (&ki, &a) in q.k.iter().zip(fs.set().modes()) {
        if ki != 0 {
            acc = acc + Interval::point(ki as f64) * interval::frequency(a, m);
        }
    }
    let la = q.a.map(|a| interval::frequency(a, m));
    let lb = q.b.map(|b| interval::frequency(b, m));
    Ok(match q.kind {
        DivisorKind::D0 => acc,
        DivisorKind::D1 => acc + la.unwrap(),
        DivisorKind::D2 => acc + la.unwrap() + lb.unwrap(),
        DivisorKind::D3 => acc + la.unwrap() - lb.unwrap(),
    })
}

/// `k = −e_s` or `k = −e_s − e_{s'}` or `k = −e_s + e_{s'}` patterns, decided
/// from indices alone.
pub fn classify_resonant(q: &DivisorQuery, set: &AdmissibleSet) -> bool {
    let n = set.n();
    if q.k.len() != n {
        return false;
    }
    let nonzero: Vec<(usize, i64)> = q
        .k
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, &v)| (i, v))
        .collect();
    let abs_of = |i: usize| set.modes()[i].abs();
    match q.kind {
        DivisorKind::D0 => nonzero.is_empty(),
        DivisorKind::D1 => {
            let a = q.a.unwrap_or(0).abs();
            matches!(nonzero.as_slice(), [(i, -1)] if abs_of(*i) == a)
        }
        DivisorKind::D2 => {
            let (a, b) = (q.a.unwrap_or(0).abs(), q.b.unwrap_or(0).abs());
            match nonzero.as_slice() {
                // s = s'
                [(i, -2)] => abs_of(*i) == a && a == b,
                [(i, -1), (j, -1)] => {
                    (abs_of(*i) == a && abs_of(*j) == b) || (abs_of(*i) == b && abs_of(*j) == a)
                }
                _ => false,
            }
        }
        DivisorKind::D3 => {
            let (a, b) = (q.a.unwrap_or(0).abs(), q.b.unwrap_or(0).abs());
            match nonzero.as_slice() {
                // s = s' only makes sense with |a| = |b|, which scans skip
                [] => a == b && set.modes().iter().any(|s| s.abs() == a),
                [(i, x), (j, y)] if *x == -*y && x.abs() == 1 => {
                    let (s, sp) = if *x == -1 { (*i, *j) } else { (*j, *i) };
                    abs_of(s) == a && abs_of(sp) == b
                }
                _ => false,
            }
        }
    }
}

/// One evaluated divisor with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorReport {
    pub query: DivisorQuery,
    pub value: f64,
    pub resonant: bool,
    pub bound_required: f64,
    pub satisfied: bool,
    /// Verdict from the interval re-evaluation, when requested.
    pub certified: Option<bool>,
}

/// Default mode cutoff `⌈2 (max|a| + 2) N⌉`.
pub fn default_mode_cutoff(set: &AdmissibleSet, kmax: i64) -> i64 {
    2 * (set.n_bound() + 2) * kmax
}

/// Measure exponents `(τ, ι)` attached to each divisor kind for a set of
/// cardinality `n`; for `D3` the pair is `(1/(2(n+2)), (n+2)(2n+5))`.
pub fn exponents(kind: DivisorKind, n: usize) -> (f64, f64) {
    let n = n as f64;
    match kind {
        DivisorKind::D0 => (1.0 / n, n),
        DivisorKind::D1 | DivisorKind::D2 => {
            (1.0 / (n + 1.0), (n + 1.0) * (2.0 * n + 3.0) + 1.0 / (n + 1.0))
        }
        DivisorKind::D3 => (1.0 / (2.0 * (n + 2.0)), (n + 2.0) * (2.0 * n + 5.0)),
    }
}

/// Exponent `ϱ = 1/(4((n+2)² + 1)(n+2))` governing the `D3` mode cap.
pub fn d3_cap_exponent(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (4.0 * ((n + 2.0).powi(2) + 1.0) * (n + 2.0))
}

/// Parameters of a lower-bound scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub kappa: f64,
    /// `|k|₁` cutoff `N`.
    pub kmax: i64,
    /// Mode cutoff `S`; `None` selects [`default_mode_cutoff`].
    pub smax: Option<i64>,
    pub kinds: Vec<DivisorKind>,
    /// Re-evaluate every violation with interval arithmetic.
    pub certify: bool,
    /// Restrict `D3` to `|a|, |b| ≤ 2κ^{−ϱ} + max|a|·N` instead of `S`.
    pub apply_d3_cap: bool,
}

impl ScanConfig {
    pub fn new(kappa: f64, kmax: i64, smax: Option<i64>) -> Self {
        ScanConfig {
            kappa,
            kmax,
            smax,
            kinds: vec![DivisorKind::D0, DivisorKind::D1, DivisorKind::D2, DivisorKind::D3],
            certify: false,
            apply_d3_cap: false,
        }
    }
}

/// Result of a scan: violations plus the bookkeeping needed to interpret
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub violations: Vec<DivisorReport>,
    pub checked: usize,
    pub resonant_skipped: usize,
    pub metadata: BTreeMap<String, f64>,
}

struct Plan {
    ks: Vec<Vec<i64>>,
    normal: Vec<i64>,
    d3_normal: Vec<i64>,
    metadata: BTreeMap<String, f64>,
}

fn plan(set: &AdmissibleSet, cfg: &ScanConfig) -> Result<Plan> {
    if !(cfg.kappa > 0.0) || cfg.kmax < 1 {
        return Err(Error::InvalidInput("need kappa > 0 and N >= 1".into()));
    }
    let s = cfg.smax.unwrap_or_else(|| default_mode_cutoff(set, cfg.kmax));
    if s < set.n_bound() {
        return Err(Error::InvalidInput(format!(
            "mode cutoff {s} below max tangential mode {}",
            set.n_bound()
        )));
    }
    let n = set.n();
    let c_a = set.n_bound() as f64;
    let rho = d3_cap_exponent(n);
    let d3_cap = 2.0 * cfg.kappa.powf(-rho) + c_a * cfg.kmax as f64;
    let d3_s = if cfg.apply_d3_cap {
        s.min(d3_cap.ceil() as i64)
    } else {
        s
    };
    let mut metadata = BTreeMap::from([
        ("kappa".to_string(), cfg.kappa),
        ("N".to_string(), cfg.kmax as f64),
        ("S".to_string(), s as f64),
        ("C_A".to_string(), c_a),
        ("rho".to_string(), rho),
        ("d3_cap".to_string(), d3_cap),
        ("d3_cap_applied".to_string(), if cfg.apply_d3_cap { 1.0 } else { 0.0 }),
    ]);
    for kind in [DivisorKind::D0, DivisorKind::D1, DivisorKind::D2, DivisorKind::D3] {
        let (tau, iota) = exponents(kind, n);
        metadata.insert(format!("tau_{kind}"), tau);
        metadata.insert(format!("iota_{kind}"), iota);
    }
    Ok(Plan {
        ks: l1_ball(n, cfg.kmax),
        normal: set.normal_modes(s),
        d3_normal: set.normal_modes(d3_s),
        metadata,
    })
}

/// Queries attached to one `k`, in canonical order: D0, D1 by `a`, D2 by
/// `a ≤ b`, D3 by `a < b` with `|a| ≠ |b|`.
fn queries_for_k<'a>(
    k: &'a [i64],
    kinds: &'a [DivisorKind],
    normal: &'a [i64],
    d3_normal: &'a [i64],
) -> impl Iterator<Item = DivisorQuery> + 'a {
    let zero = k.iter().all(|&x| x == 0);
    let has = move |kind| kinds.contains(&kind);
    let d0 = (!zero && has(DivisorKind::D0)).then(|| DivisorQuery::d0(k.to_vec()));
    let d1 = (!zero && has(DivisorKind::D1))
        .then(|| normal.iter().map(move |&a| DivisorQuery::d1(k.to_vec(), a)))
        .into_iter()
        .flatten();
    let d2 = (!zero && has(DivisorKind::D2))
        .then(|| {
            normal.iter().enumerate().flat_map(move |(i, &a)| {
                normal[i..].iter().map(move |&b| DivisorQuery::d2(k.to_vec(), a, b))
            })
        })
        .into_iter()
        .flatten();
    let d3 = has(DivisorKind::D3)
        .then(|| {
            d3_normal.iter().enumerate().flat_map(move |(i, &a)| {
                d3_normal[i + 1..]
                    .iter()
                    .filter(move |&&b| a.abs() != b.abs())
                    .map(move |&b| DivisorQuery::d3(k.to_vec(), a, b))
            })
        })
        .into_iter()
        .flatten();
    d0.into_iter().chain(d1).chain(d2).chain(d3)
}

fn report(q: DivisorQuery, fs: &FrequencySystem, omega: &[f64], kappa: f64, certify: bool) -> DivisorReport {
    let resonant = classify_resonant(&q, fs.set());
    let la = q.a.map_or(0.0, |a| fs.lambda(a));
    let lb = q.b.map_or(0.0, |b| fs.lambda(b));
    let value = combine(q.kind, omega_dot(&q.k, omega), la, lb);
    let (bound_required, satisfied) = if resonant {
        (0.0, true)
    } else {
        let req = kappa * q.weight();
        (req, value.abs() >= req)
    };
    let certified = if certify && !resonant {
        let iv = evaluate_divisor_interval(&q, fs).expect("query built from the set");
        let req = Interval::point(kappa) * Interval::point(q.weight());
        Some(iv.mig() >= req.hi)
    } else {
        None
    };
    DivisorReport { query: q, value, resonant, bound_required, satisfied, certified }
}

/// Every non-resonant divisor with `|k|₁ ≤ N` and modes `|a|, |b| ≤ S` whose
/// magnitude falls below `κ · weight`.
pub fn scan(fs: &FrequencySystem, cfg: &ScanConfig) -> Result<ScanOutcome> {
    let p = plan(fs.set(), cfg)?;
    let omega = fs.omega();
    let per_k: Vec<(Vec<DivisorReport>, usize, usize)> = p
        .ks
        .par_iter()
        .map(|k| {
            let mut bad = Vec::new();
            let (mut checked, mut resonant) = (0, 0);
            for q in queries_for_k(k, &cfg.kinds, &p.normal, &p.d3_normal) {
                let r = report(q, fs, &omega, cfg.kappa, false);
                checked += 1;
                if r.resonant {
                    resonant += 1;
                } else if !r.satisfied {
                    bad.push(r);
                }
            }
            (bad, checked, resonant)
        })
        .collect();
    let mut out = ScanOutcome {
        violations: Vec::new(),
        checked: 0,
        resonant_skipped: 0,
        metadata: p.metadata,
    };
    for (bad, c, r) in per_k {
        out.checked += c;
        out.resonant_skipped += r;
        out.violations.extend(bad);
    }
    if cfg.certify {
        for v in &mut out.violations {
            let iv = evaluate_divisor_interval(&v.query, fs)?;
            let req = Interval::point(cfg.kappa) * Interval::point(v.query.weight());
            v.certified = Some(iv.mig() >= req.hi);
        }
    }
    Ok(out)
}

/// Violations of the lower bounds `|D| ≥ κ · weight`; an empty result
/// certifies the bounds at this resolution.
pub fn scan_lower_bounds(fs: &FrequencySystem, kappa: f64, kmax: i64, smax: Option<i64>) -> Result<Vec<DivisorReport>> {
    Ok(scan(fs, &ScanConfig::new(kappa, kmax, smax))?.violations)
}

/// Evaluates and certifies one query on its own.
pub fn check_query(q: &DivisorQuery, fs: &FrequencySystem, kappa: f64) -> Result<DivisorReport> {
    q.validate(fs.set())?;
    Ok(report(q.clone(), fs, &fs.omega(), kappa, true))
}

fn any_violation(fs: &FrequencySystem, p: &Plan, cfg: &ScanConfig) -> bool {
    let omega = fs.omega();
    p.ks.iter().any(|k| {
        queries_for_k(k, &cfg.kinds, &p.normal, &p.d3_normal).any(|q| {
            let r = report(q, fs, &omega, cfg.kappa, false);
            !r.resonant && !r.satisfied
        })
    })
}

/// Fraction of grid masses at which [`scan`] finds a violation, next to the
/// shape `Σ_kinds κ^τ N^ι` (no absolute constant).
pub fn excluded_mass_scan(set: &AdmissibleSet, cfg: &ScanConfig, grid: usize) -> Result<MeasureEstimate> {
    if grid < 1 {
        return Err(Error::InvalidInput("grid must be positive".into()));
    }
    let p = plan(set, cfg)?;
    let excluded = mass_grid(grid)
        .filter(|&m| {
            let fs = FrequencySystem::new(Mass::new(m).expect("grid inside [1,2]"), set.clone());
            any_violation(&fs, &p, cfg)
        })
        .count();
    let n = set.n();
    let shape: f64 = cfg
        .kinds
        .iter()
        .map(|&kind| {
            let (tau, iota) = exponents(kind, n);
            cfg.kappa.powf(tau) * (cfg.kmax as f64).powf(iota)
        })
        .sum();
    Ok(MeasureEstimate {
        analytic_bound: shape,
        sampled_measure: excluded as f64 / grid as f64,
        grid_points: grid,
        parameters: p.metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(m: f64, modes: &[i64]) -> FrequencySystem {
        FrequencySystem::new(Mass::new(m).unwrap(), AdmissibleSet::new(modes).unwrap())
    }

    #[test]
    fn evaluate_examples() {
        let f = fs(1.0, &[1, 2]);
        assert_eq!(evaluate_divisor(&DivisorQuery::d0(vec![0, 0]), &f).unwrap(), 0.0);
        let v = evaluate_divisor(&DivisorQuery::d3(vec![0, 0], 5, 3), &f).unwrap();
        assert!((v - (26f64.sqrt() - 10f64.sqrt())).abs() < 1e-14);
        assert!((v - 1.93674).abs() < 1e-5);
        let v = evaluate_divisor(&DivisorQuery::d2(vec![-1, -1], -1, -2), &f).unwrap();
        assert!(v.abs() < 1e-15);
        assert!(matches!(
            evaluate_divisor(&DivisorQuery::d1(vec![0, 0], 1), &f),
            Err(Error::TangentialMode(1))
        ));
        assert!(evaluate_divisor(&DivisorQuery::d1(vec![0], -1), &f).is_err());
    }

    #[test]
    fn classify_examples() {
        let a = AdmissibleSet::new(&[1, 2]).unwrap();
        assert!(classify_resonant(&DivisorQuery::d1(vec![-1, 0], -1), &a));
        for k in l1_ball(2, 3) {
            assert!(!classify_resonant(&DivisorQuery::d1(k, 5), &a));
        }
        assert!(classify_resonant(&DivisorQuery::d3(vec![-1, 1], -1, -2), &a));
        assert!(!classify_resonant(&DivisorQuery::d3(vec![1, -1], -1, -2), &a));
        assert!(classify_resonant(&DivisorQuery::d0(vec![0, 0]), &a));
        assert!(classify_resonant(&DivisorQuery::d2(vec![-1, -1], -2, -1), &a));
        assert!(classify_resonant(&DivisorQuery::d2(vec![0, -2], -2, -2), &a));
    }

    #[test]
    fn resonant_divisors_vanish_for_every_mass() {
        let set = AdmissibleSet::new(&[0, 1, 5]).unwrap();
        for i in 0..=100 {
            let f = FrequencySystem::new(Mass::new(1.0 + i as f64 / 100.0).unwrap(), set.clone());
            let cfg = ScanConfig::new(1.0, 2, Some(7));
            let p = plan(&set, &cfg).unwrap();
            for k in &p.ks {
                for q in queries_for_k(k, &cfg.kinds, &p.normal, &p.d3_normal) {
                    if classify_resonant(&q, &set) {
                        assert!(evaluate_divisor(&q, &f).unwrap().abs() < 1e-12, "{q:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn weights() {
        assert_eq!(DivisorQuery::d0(vec![1]).weight(), 1.0);
        assert_eq!(DivisorQuery::d1(vec![1], 0).weight(), 1.0);
        assert_eq!(DivisorQuery::d1(vec![1], -4).weight(), 4.0);
        assert_eq!(DivisorQuery::d2(vec![1], 0, 3).weight(), 4.0);
        assert_eq!(DivisorQuery::d3(vec![1], -7, 3).weight(), 5.0);
    }

    #[test]
    fn d3_oddness() {
        let f = fs(1.37, &[0, 3]);
        for k in l1_ball(2, 3) {
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            let v = evaluate_divisor(&DivisorQuery::d3(k.clone(), 4, -2), &f).unwrap();
            let w = evaluate_divisor(&DivisorQuery::d3(neg, -2, 4), &f).unwrap();
            assert!((v + w).abs() < 1e-13);
        }
    }

    #[test]
    fn unreachable_kappa_flags_almost_everything() {
        let f = fs(1.3, &[1]);
        let out = scan(&f, &ScanConfig::new(10.0, 2, Some(6))).unwrap();
        assert!(out.violations.len() as f64 >= 0.9 * (out.checked - out.resonant_skipped) as f64);
    }

    #[test]
    fn difference_divisor_at_zero_k_separated() {
        let f = fs(1.0, &[0]);
        let mut cfg = ScanConfig::new(0.125, 1, Some(60));
        cfg.kinds = vec![DivisorKind::D3];
        let out = scan(&f, &cfg).unwrap();
        assert!(out.violations.iter().all(|r| r.query.k_l1() > 0));
    }

    #[test]
    fn certification_agrees_on_clear_cases() {
        let f = fs(1.3, &[1]);
        let mut cfg = ScanConfig::new(10.0, 1, Some(4));
        cfg.certify = true;
        let out = scan(&f, &cfg).unwrap();
        assert!(!out.violations.is_empty());
        assert!(out.violations.iter().all(|v| v.certified == Some(false)));
        let r = check_query(&DivisorQuery::d1(vec![1], 3), &f, 1e-3).unwrap();
        assert!(r.satisfied && r.certified == Some(true));
    }

    #[test]
    fn exponent_table() {
        let (t, i) = exponents(DivisorKind::D3, 1);
        assert!((t - 1.0 / 6.0).abs() < 1e-15 && i == 21.0);
        assert!((d3_cap_exponent(1) - 1.0 / 120.0).abs() < 1e-15);
        assert_eq!(exponents(DivisorKind::D0, 2), (0.5, 2.0));
    }

    #[test]
    fn default_cutoff() {
        let a = AdmissibleSet::new(&[0, 1, 5]).unwrap();
        assert_eq!(default_mode_cutoff(&a, 3), 42);
    }
}
