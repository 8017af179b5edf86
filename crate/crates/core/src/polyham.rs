//! Sparse complex polynomials in the variables `ξ_s, η_s` (`|s| ≤ S`), with
//! the Poisson bracket `{f,g} = i Σ_j (∂f/∂η_j ∂g/∂ξ_j − ∂f/∂ξ_j ∂g/∂η_j)`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::FrequencySystem;

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Which half of a conjugate pair a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Xi(i64),
    Eta(i64),
}

impl Var {
    pub fn index(self) -> i64 {
        match self {
            Var::Xi(s) | Var::Eta(s) => s,
        }
    }
}

/// `ξ^α η^β`, stored as sorted index lists with repetition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    xi: Vec<i64>,
    eta: Vec<i64>,
}

fn merge_sorted(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn exponent_map(v: &[i64]) -> BTreeMap<i64, u32> {
    let mut m = BTreeMap::new();
    for &s in v {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

impl Monomial {
    pub fn new(mut xi: Vec<i64>, mut eta: Vec<i64>) -> Self {
        xi.sort_unstable();
        eta.sort_unstable();
        Monomial { xi, eta }
    }

    pub fn one() -> Self {
        Monomial { xi: Vec::new(), eta: Vec::new() }
    }

    /// `ξ_s η_s`.
    pub fn action(s: i64) -> Self {
        Monomial { xi: vec![s], eta: vec![s] }
    }

    pub fn xi(&self) -> &[i64] {
        &self.xi
    }

    pub fn eta(&self) -> &[i64] {
        &self.eta
    }

    pub fn xi_exponents(&self) -> BTreeMap<i64, u32> {
        exponent_map(&self.xi)
    }

    pub fn eta_exponents(&self) -> BTreeMap<i64, u32> {
        exponent_map(&self.eta)
    }

    pub fn degree(&self) -> usize {
        self.xi.len() + self.eta.len()
    }

    /// `Σ ξ-indices − Σ η-indices`.
    pub fn momentum(&self) -> i64 {
        self.xi.iter().sum::<i64>() - self.eta.iter().sum::<i64>()
    }

    /// Depends on the actions `ξ_s η_s` only.
    pub fn is_action(&self) -> bool {
        self.xi == self.eta
    }

    /// `ξ^β η^α` for `ξ^α η^β`.
    pub fn conj(&self) -> Self {
        Monomial { xi: self.eta.clone(), eta: self.xi.clone() }
    }

    pub fn mul(&self, o: &Monomial) -> Self {
        Monomial {
            xi: merge_sorted(&self.xi, &o.xi),
            eta: merge_sorted(&self.eta, &o.eta),
        }
    }

    pub fn max_abs_index(&self) -> i64 {
        self.xi.iter().chain(&self.eta).map(|s| s.abs()).max().unwrap_or(0)
    }

    /// All variables with repetition, ξ first.
    pub fn letters(&self) -> impl Iterator<Item = Var> + '_ {
        self.xi.iter().map(|&s| Var::Xi(s)).chain(self.eta.iter().map(|&s| Var::Eta(s)))
    }

    /// `Σ_α λ − Σ_β λ`, the eigenvalue of `{H₂, ·}/i` on this monomial.
    pub fn frequency(&self, fs: &FrequencySystem) -> f64 {
        self.xi.iter().map(|&s| fs.lambda(s)).sum::<f64>()
            - self.eta.iter().map(|&s| fs.lambda(s)).sum::<f64>()
    }

    /// Exponent of `v` and the monomial with one factor of `v` removed.
    pub fn derivative(&self, v: Var) -> Option<(u32, Monomial)> {
        let (list, other_is_xi) = match v {
            Var::Xi(s) => (&self.xi, s),
            Var::Eta(s) => (&self.eta, s),
        };
        let e = list.iter().filter(|&&x| x == other_is_xi).count() as u32;
        if e == 0 {
            return None;
        }
        let mut out = self.clone();
        let target = match v {
            Var::Xi(_) => &mut out.xi,
            Var::Eta(_) => &mut out.eta,
        };
        let pos = target.iter().position(|&x| x == other_is_xi).unwrap();
        target.remove(pos);
        Some((e, out))
    }

    /// Value at a phase point.
    pub fn evaluate(&self, z: &PhasePoint) -> C64 {
        self.letters().map(|v| z.get(v)).product()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |m: BTreeMap<i64, u32>| {
            m.iter().map(|(s, e)| format!("{s}^{e}")).collect::<Vec<_>>().join(",")
        };
        write!(f, "xi:<{}> eta:<{}>", list(self.xi_exponents()), list(self.eta_exponents()))
    }
}

/// Point of the truncated phase space `{(ξ_s, η_s) : |s| ≤ S}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub cutoff: i64,
    pub xi: Vec<C64>,
    pub eta: Vec<C64>,
}

impl PhasePoint {
    pub fn zeros(cutoff: i64) -> Self {
        let len = (2 * cutoff + 1) as usize;
        PhasePoint { cutoff, xi: vec![C64::new(0.0, 0.0); len], eta: vec![C64::new(0.0, 0.0); len] }
    }

    /// Real point with `η_s = conj(ξ_s)`.
    pub fn real(cutoff: i64, xi: Vec<C64>) -> Self {
        assert_eq!(xi.len(), (2 * cutoff + 1) as usize);
        let eta = xi.iter().map(|z| z.conj()).collect();
        PhasePoint { cutoff, xi, eta }
    }

    pub fn slot(&self, s: i64) -> usize {
        debug_assert!(s.abs() <= self.cutoff);
        (s + self.cutoff) as usize
    }

    pub fn get(&self, v: Var) -> C64 {
        match v {
            Var::Xi(s) if s.abs() <= self.cutoff => self.xi[self.slot(s)],
            Var::Eta(s) if s.abs() <= self.cutoff => self.eta[self.slot(s)],
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn set(&mut self, v: Var, value: C64) {
        let i = self.slot(v.index());
        match v {
            Var::Xi(_) => self.xi[i] = value,
            Var::Eta(_) => self.eta[i] = value,
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        -self.cutoff..=self.cutoff
    }

    /// `max_s |η_s − conj(ξ_s)|`.
    pub fn reality_defect(&self) -> f64 {
        self.xi.iter().zip(&self.eta).map(|(x, e)| (e - x.conj()).norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    /// `‖ζ‖_α² = Σ (|ξ_s|² + |η_s|²) ⟨s⟩^{2α}`.
    pub fn weighted_norm(&self, p: NormParams) -> f64 {
        self.modes()
            .map(|s| {
                let i = self.slot(s);
                (self.xi[i].norm_sqr() + self.eta[i].norm_sqr()) * bracket(s).powf(2.0 * p.alpha)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        PhasePoint {
            cutoff: self.cutoff,
            xi: self.xi.iter().map(|z| z * c).collect(),
            eta: self.eta.iter().map(|z| z * c).collect(),
        }
    }
}

/// `⟨s⟩ = max(|s|, 1)`.
pub fn bracket(s: i64) -> f64 {
    s.abs().max(1) as f64
}

/// Sobolev-type weights `α > 1/2` (phase space) and `β ≥ 0` (Hessians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub alpha: f64,
    pub beta: f64,
}

impl NormParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.5) || !(beta >= 0.0) {
            return Err(Error::InvalidInput("need alpha > 1/2 and beta >= 0".into()));
        }
        Ok(NormParams { alpha, beta })
    }
}

/// Sparse polynomial with canonical (sorted) term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyHamiltonian {
    cutoff: i64,
    terms: BTreeMap<Monomial, C64>,
}

impl PolyHamiltonian {
    pub fn zero(cutoff: i64) -> Self {
        PolyHamiltonian { cutoff, terms: BTreeMap::new() }
    }

    pub fn from_terms(cutoff: i64, terms: impl IntoIterator<Item = (Monomial, C64)>) -> Result<Self> {
        let mut p = Self::zero(cutoff);
        for (m, c) in terms {
            if m.max_abs_index() > cutoff {
                return Err(Error::InvalidInput(format!("monomial {m} exceeds cutoff {cutoff}")));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, C64> {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    /// Adds `c·m`, dropping the entry if it becomes exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        debug_assert!(m.max_abs_index() <= self.cutoff);
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == C64::new(0.0, 0.0) {
                    o.remove();
                }
            }
        }
    }

    fn check_cutoff(&self, o: &Self) -> Result<()> {
        if self.cutoff != o.cutoff {
            return Err(Error::CutoffMismatch { left: self.cutoff, right: o.cutoff });
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_cutoff(o)?;
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero(self.cutoff);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    /// Terms whose degree satisfies `keep`.
    pub fn filter_degree(&self, keep: impl Fn(usize) -> bool) -> Self {
        self.filter(|m, _| keep(m.degree()))
    }

    pub fn filter(&self, keep: impl Fn(&Monomial, &C64) -> bool) -> Self {
        PolyHamiltonian {
            cutoff: self.cutoff,
            terms: self.terms.iter().filter(|(m, c)| keep(m, c)).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).min().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max_m |c_self(m) − c_other(m)|` over the union of supports.
    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (m, c) in &self.terms {
            d = d.max((c - o.coeff(m)).norm());
        }
        for (m, c) in &o.terms {
            if !self.terms.contains_key(m) {
                d = d.max(c.norm());
            }
        }
        d
    }

    /// `max |c(ξ^α η^β) − conj(c(ξ^β η^α))|`.
    pub fn reality_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (m, c) in &self.terms {
            d = d.max((c - self.coeff(&m.conj()).conj()).norm());
        }
        d
    }

    /// Real-valued on `η = conj ξ`, up to `tol` relative to the largest
    /// coefficient.
    pub fn reality_flag(&self, tol: f64) -> bool {
        self.reality_defect() <= tol * self.max_abs_coeff().max(f64::MIN_POSITIVE)
    }

    /// Every monomial satisfies `Σ ξ-indices = Σ η-indices`.
    pub fn is_zero_momentum(&self) -> bool {
        self.terms.keys().all(|m| m.momentum() == 0)
    }

    pub fn evaluate(&self, z: &PhasePoint) -> C64 {
        self.terms.iter().map(|(m, c)| c * m.evaluate(z)).sum()
    }

    /// Canonical text form, one monomial per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# cutoff={}\n", self.cutoff);
        for (m, c) in &self.terms {
            s.push_str(&format!("{m} re:{:e} im:{:e}\n", c.re, c.im));
        }
        s
    }

    /// Parses [`to_text`](Self::to_text) output. Lines starting with `#`
    /// other than `# cutoff=` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cutoff = None;
        let mut terms = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("cutoff=") {
                    cutoff = Some(v.trim().parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?);
                }
                continue;
            }
            terms.push(parse_term(line)?);
        }
        let cutoff = cutoff.unwrap_or_else(|| terms.iter().map(|(m, _)| m.max_abs_index()).max().unwrap_or(0));
        Self::from_terms(cutoff, terms)
    }
}

fn parse_list(field: &str, tag: &str) -> Result<Vec<i64>> {
    let body = field
        .strip_prefix(tag)
        .and_then(|r| r.strip_prefix('<'))
        .and_then(|r| r.strip_suffix('>'))
        .ok_or_else(|| Error::Parse(format!("bad field {field:?}")))?;
    let mut out = Vec::new();
    for item in body.split(',').filter(|x| !x.is_empty()) {
        let (s, e) = item.split_once('^').ok_or_else(|| Error::Parse(format!("bad factor {item:?}")))?;
        let s: i64 = s.parse().map_err(|_| Error::Parse(format!("bad index {s:?}")))?;
        let e: usize = e.parse().map_err(|_| Error::Parse(format!("bad exponent {e:?}")))?;
        out.extend(std::iter::repeat_n(s, e));
    }
    Ok(out)
}

fn parse_term(line: &str) -> Result<(Monomial, C64)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse(format!("expected 4 fields in {line:?}")));
    }
    let xi = parse_list(fields[0], "xi:")?;
    let eta = parse_list(fields[1], "eta:")?;
    let num = |f: &str, tag: &str| -> Result<f64> {
        f.strip_prefix(tag)
            .ok_or_else(|| Error::Parse(format!("missing {tag}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad number in {f:?}")))
    };
    Ok((Monomial::new(xi, eta), C64::new(num(fields[2], "re:")?, num(fields[3], "im:")?)))
}

/// `H₂ = Σ_{|s| ≤ S} λ_s ξ_s η_s`.
pub fn build_h2(cutoff: i64, fs: &FrequencySystem) -> PolyHamiltonian {
    let mut p = PolyHamiltonian::zero(cutoff);
    for s in -cutoff..=cutoff {
        p.add_term(Monomial::action(s), C64::new(fs.lambda(s), 0.0));
    }
    p
}

/// `∫ c(x) u^d dx` with `u = Σ_s (ξ_s φ_s + η_s φ_{−s})/√(2λ_s)`,
/// `φ_s = e^{isx}/√(2π)` and `c(x) = Σ_q c_q e^{iqx}`.
///
/// Multisets of letters are enumerated once each and weighted by their
/// number of orderings.
pub fn build_potential(cutoff: i64, fs: &FrequencySystem, degree: usize, weights: &[(i64, C64)]) -> PolyHamiltonian {
    // Letters 0..L: ξ_{-S..S} then η_{-S..S}; ξ_s carries momentum s, η_s carries −s.
    let width = (2 * cutoff + 1) as usize;
    let letter = |i: usize| -> Var {
        let s = (i % width) as i64 - cutoff;
        if i < width { Var::Xi(s) } else { Var::Eta(s) }
    };
    let momentum = |v: Var| match v {
        Var::Xi(s) => s,
        Var::Eta(s) => -s,
    };
    let amp: Vec<f64> = (0..2 * width).map(|i| 1.0 / (2.0 * fs.lambda(letter(i).index())).sqrt()).collect();
    let norm = (2.0 * PI).powf(1.0 - degree as f64 / 2.0);
    let factorial = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();

    let mut out = PolyHamiltonian::zero(cutoff);
    let mut seq = Vec::with_capacity(degree);
    fn rec(
        start: usize,
        total: usize,
        seq: &mut Vec<usize>,
        degree: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if seq.len() == degree {
            visit(seq);
            return;
        }
        for i in start..total {
            seq.push(i);
            rec(i, total, seq, degree, visit);
            seq.pop();
        }
    }
    let mut visit = |seq: &[usize]| {
        let p: i64 = seq.iter().map(|&i| momentum(letter(i))).sum();
        for &(q, cq) in weights {
            if p + q != 0 {
                continue;
            }
            let mut mult = factorial(degree);
            let mut run = 1;
            for w in 1..=seq.len() {
                if w < seq.len() && seq[w] == seq[w - 1] {
                    run += 1;
                } else {
                    mult /= factorial(run);
                    run = 1;
                }
            }
            let a: f64 = seq.iter().map(|&i| amp[i]).product();
            let (mut xi, mut eta) = (Vec::new(), Vec::new());
            for &i in seq {
                match letter(i) {
                    Var::Xi(s) => xi.push(s),
                    Var::Eta(s) => eta.push(s),
                }
            }
            out.add_term(Monomial::new(xi, eta), cq * (mult * a * norm));
        }
    };
    rec(0, 2 * width, &mut seq, degree, &mut visit);
    out
}

/// `P₄ = ∫ u⁴ dx`.
pub fn build_p4(cutoff: i64, fs: &FrequencySystem) -> PolyHamiltonian {
    build_potential(cutoff, fs, 4, &[(0, C64::new(1.0, 0.0))])
}

/// `(P₄⁰, P₄¹, P₄²)`: all-ξ/all-η, three-one, and two-two monomials.
pub fn split_by_type(p: &PolyHamiltonian) -> (PolyHamiltonian, PolyHamiltonian, PolyHamiltonian) {
    let kind = |m: &Monomial| m.xi().len().min(m.eta().len());
    (p.filter(|m, _| kind(m) == 0), p.filter(|m, _| kind(m) == 1), p.filter(|m, _| kind(m) == 2))
}

type Partials = HashMap<i64, Vec<(Monomial, C64)>>;

/// `s ↦ [(∂m/∂v without the coefficient, c·exponent)]` for `v = ξ_s` or `η_s`.
fn partials(p: &PolyHamiltonian, xi: bool) -> Partials {
    let mut out: Partials = HashMap::new();
    for (m, c) in &p.terms {
        let list = if xi { m.xi() } else { m.eta() };
        let mut prev = None;
        for &s in list {
            if prev == Some(s) {
                continue;
            }
            prev = Some(s);
            let v = if xi { Var::Xi(s) } else { Var::Eta(s) };
            let (e, d) = m.derivative(v).unwrap();
            out.entry(s).or_default().push((d, c * e as f64));
        }
    }
    out
}

/// Exact symbolic Poisson bracket.
pub fn poisson_bracket(f: &PolyHamiltonian, g: &PolyHamiltonian) -> Result<PolyHamiltonian> {
    f.check_cutoff(g)?;
    let (f_xi, f_eta) = (partials(f, true), partials(f, false));
    let (g_xi, g_eta) = (partials(g, true), partials(g, false));
    let mut vars: Vec<i64> = f_xi.keys().chain(f_eta.keys()).copied().collect();
    vars.sort_unstable();
    vars.dedup();
    let empty = Vec::new();
    let chunks: Vec<HashMap<Monomial, C64>> = vars
        .par_iter()
        .map(|s| {
            let mut acc: HashMap<Monomial, C64> = HashMap::new();
            // + i ∂f/∂η_s ∂g/∂ξ_s
            for (mf, cf) in f_eta.get(s).unwrap_or(&empty) {
                for (mg, cg) in g_xi.get(s).unwrap_or(&empty) {
                    *acc.entry(mf.mul(mg)).or_default() += I * cf * cg;
                }
            }
            // − i ∂f/∂ξ_s ∂g/∂η_s
            for (mf, cf) in f_xi.get(s).unwrap_or(&empty) {
                for (mg, cg) in g_eta.get(s).unwrap_or(&empty) {
                    *acc.entry(mf.mul(mg)).or_default() -= I * cf * cg;
                }
            }
            acc
        })
        .collect();
    let mut merged: BTreeMap<Monomial, C64> = BTreeMap::new();
    for chunk in chunks {
        let mut sorted: Vec<_> = chunk.into_iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        for (m, c) in sorted {
            *merged.entry(m).or_default() += c;
        }
    }
    merged.retain(|_, c| *c != C64::new(0.0, 0.0));
    Ok(PolyHamiltonian { cutoff: f.cutoff, terms: merged })
}

/// `{H₂, f}` using `{H₂, ξ^α η^β} = i(Σ_α λ − Σ_β λ) ξ^α η^β`.
pub fn bracket_with_h2(f: &PolyHamiltonian, fs: &FrequencySystem) -> PolyHamiltonian {
    let mut out = PolyHamiltonian::zero(f.cutoff);
    for (m, c) in &f.terms {
        out.add_term(m.clone(), c * I * m.frequency(fs));
    }
    out
}

/// `Σ_n P^n f / n!` with `P f = {f, χ}`, dropping every term of degree above
/// `max_degree`.
pub fn lie_transform(f: &PolyHamiltonian, chi: &PolyHamiltonian, max_degree: usize) -> Result<PolyHamiltonian> {
    f.check_cutoff(chi)?;
    if max_degree < f.max_degree() {
        return Err(Error::InvalidInput("max_degree below degree of f".into()));
    }
    if chi.is_empty() {
        return Ok(f.clone());
    }
    let raise = chi.min_degree().saturating_sub(2);
    let mut out = f.clone();
    let mut term = f.clone();
    for n in 1..=64 {
        let src = term.filter_degree(|d| d + raise <= max_degree);
        if src.is_empty() {
            break;
        }
        term = poisson_bracket(&src, chi)?
            .filter_degree(|d| d <= max_degree)
            .scale(C64::new(1.0 / n as f64, 0.0));
        if term.is_empty() {
            break;
        }
        out = out.add(&term)?;
    }
    Ok(out)
}

/// `(∂f/∂ξ_s, ∂f/∂η_s)` packed as a phase point.
pub fn gradient(f: &PolyHamiltonian, z: &PhasePoint) -> PhasePoint {
    let mut g = PhasePoint::zeros(z.cutoff);
    for (m, c) in &f.terms {
        let letters: Vec<Var> = m.letters().collect();
        let vals: Vec<C64> = letters.iter().map(|&v| z.get(v)).collect();
        for (p, &v) in letters.iter().enumerate() {
            if v.index().abs() > z.cutoff {
                continue;
            }
            let rest: C64 = vals.iter().enumerate().filter(|(q, _)| *q != p).map(|(_, x)| x).product();
            let cur = g.get(v);
            g.set(v, cur + c * rest);
        }
    }
    g
}

/// `[[∂²/∂ξ_s∂ξ_t, ∂²/∂ξ_s∂η_t], [∂²/∂η_s∂ξ_t, ∂²/∂η_s∂η_t]]`.
pub type Block = [[C64; 2]; 2];

/// Second derivatives grouped into 2×2 blocks indexed by mode pairs.
pub fn hessian(f: &PolyHamiltonian, z: &PhasePoint) -> BTreeMap<(i64, i64), Block> {
    let mut h: BTreeMap<(i64, i64), Block> = BTreeMap::new();
    let slot = |v: Var| match v {
        Var::Xi(_) => 0,
        Var::Eta(_) => 1,
    };
    for (m, c) in &f.terms {
        let letters: Vec<Var> = m.letters().collect();
        let vals: Vec<C64> = letters.iter().map(|&v| z.get(v)).collect();
        for (p, &vp) in letters.iter().enumerate() {
            for (q, &vq) in letters.iter().enumerate() {
                if p == q {
                    continue;
                }
                let rest: C64 = vals
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != p && *r != q)
                    .map(|(_, x)| x)
                    .product();
                let block = h.entry((vp.index(), vq.index())).or_default();
                block[slot(vp)][slot(vq)] += c * rest;
            }
        }
    }
    h
}

fn block_norm(b: &Block) -> f64 {
    b.iter().map(|row| row[0].norm() + row[1].norm()).fold(0.0, f64::max)
}

/// `|A|_β = sup ⟨s⟩^β ⟨t⟩^β ‖A_s^t‖` over stored blocks (row-sum norm).
pub fn hessian_norm(h: &BTreeMap<(i64, i64), Block>, beta: f64) -> f64 {
    h.iter()
        .map(|(&(s, t), b)| (bracket(s) * bracket(t)).powf(beta) * block_norm(b))
        .fold(0.0, f64::max)
}

/// `|A|_{β+}`: [`hessian_norm`] with the extra factor `1 + ||s| − |t||`.
pub fn hessian_norm_plus(h: &BTreeMap<(i64, i64), Block>, beta: f64) -> f64 {
    h.iter()
        .map(|(&(s, t), b)| {
            (bracket(s) * bracket(t)).powf(beta) * (1.0 + (s.abs() - t.abs()).abs() as f64) * block_norm(b)
        })
        .fold(0.0, f64::max)
}

/// Mode-indexed sequence with finite support.
pub type Sequence = BTreeMap<i64, C64>;

/// `(v∗w)_l = Σ_{i+j=l} v_i w_j`.
pub fn convolution(v: &Sequence, w: &Sequence) -> Sequence {
    let mut out = Sequence::new();
    for (&i, a) in v {
        for (&j, b) in w {
            *out.entry(i + j).or_default() += a * b;
        }
    }
    out
}

/// `‖v‖_α = (Σ |v_s|² ⟨s⟩^{2α})^{1/2}`.
pub fn sequence_norm(v: &Sequence, alpha: f64) -> f64 {
    v.iter().map(|(&s, c)| c.norm_sqr() * bracket(s).powf(2.0 * alpha)).sum::<f64>().sqrt()
}

/// Constant in `‖v∗w‖_α ≤ C(α) ‖v‖_α ‖w‖_α`: `2^{α+1} (Σ_ℤ ⟨i⟩^{−2α})^{1/2}`,
/// from `⟨i+j⟩^α ≤ 2^α(⟨i⟩^α + ⟨j⟩^α)`, Young's inequality and Cauchy–Schwarz.
pub fn algebra_constant(alpha: f64) -> f64 {
    assert!(alpha > 0.5);
    let p = 2.0 * alpha;
    let cut = 100_000u32;
    let head: f64 = (1..cut).map(|i| (i as f64).powf(-p)).sum();
    // Σ_{i ≥ K} i^{−p} ≈ ∫_{K−1/2}^∞ x^{−p} dx
    let tail = (cut as f64 - 0.5).powf(1.0 - p) / (p - 1.0);
    2f64.powf(alpha + 1.0) * (1.0 + 2.0 * (head + tail)).sqrt()
}

/// Random polynomial of the given degree with `terms` distinct monomials
/// (before symmetrisation). With `real` every term is paired with its
/// conjugate so the result has the reality property; with `zero_momentum`
/// every monomial satisfies `Σ ξ-idx = Σ η-idx`.
pub fn random_polynomial<R: Rng>(
    rng: &mut R,
    cutoff: i64,
    degree: usize,
    terms: usize,
    zero_momentum: bool,
    real: bool,
) -> PolyHamiltonian {
    let mut p = PolyHamiltonian::zero(cutoff);
    let mut made = 0;
    while made < terms {
        let letters: Vec<Var> = (0..degree)
            .map(|_| {
                let s = rng.random_range(-cutoff..=cutoff);
                if rng.random_bool(0.5) { Var::Xi(s) } else { Var::Eta(s) }
            })
            .collect();
        let mut letters = letters;
        if zero_momentum && degree > 0 {
            let last = letters.pop().unwrap();
            let p0: i64 = letters.iter().map(|v| match v { Var::Xi(s) => *s, Var::Eta(s) => -s }).sum();
            let v = match last {
                Var::Xi(_) => Var::Xi(-p0),
                Var::Eta(_) => Var::Eta(p0),
            };
            if v.index().abs() > cutoff {
                continue;
            }
            letters.push(v);
        }
        let (mut xi, mut eta) = (Vec::new(), Vec::new());
        for v in letters {
            match v {
                Var::Xi(s) => xi.push(s),
                Var::Eta(s) => eta.push(s),
            }
        }
        let m = Monomial::new(xi, eta);
        let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if real {
            p.add_term(m.conj(), c.conj());
        }
        p.add_term(m, c);
        made += 1;
    }
    p
}
