//! Order-four Birkhoff normal form of `H₂ + P₄`.
//!
//! A quartic monomial `ξ^α η^β` is removed by the generator `χ₄` when its
//! frequency `Σ_α λ − Σ_β λ` cannot vanish and it touches the tangential set
//! often enough; what stays splits into the resonant part `Z₄` and the
//! remainder `Q₄`, so that `{H₂, χ₄} = Z₄ + Q₄ − P₄`.
//!
//! "Touches the tangential set" counts index positions: `ξ_a² η_k η_l` with
//! `a ∈ 𝒜` and `k, l ∈ ℒ` has two tangential positions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyham::{build_h2, poisson_bracket, Monomial, PolyHamiltonian, C64};
use crate::spectrum::{AdmissibleSet, FrequencySystem};

/// Combinatorial classification of a quadruple `(i, j, k, l)` read as the
/// monomial `ξ_i ξ_j η_k η_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    /// `i + j = k + l`.
    pub in_j: bool,
    /// At least two of the four positions lie in `𝒜`.
    pub in_j2: bool,
    /// `{|i|, |j|} = {|k|, |l|}` as multisets.
    pub in_r2: bool,
    pub tangential_positions: usize,
    /// `λ_i + λ_j − λ_k − λ_l` vanishes for every mass.
    pub omega_identically_zero: bool,
}

pub fn resonance_membership(quad: [i64; 4], set: &AdmissibleSet) -> Membership {
    let [i, j, k, l] = quad;
    let mut left = [i.abs(), j.abs()];
    let mut right = [k.abs(), l.abs()];
    left.sort_unstable();
    right.sort_unstable();
    let r = quad.iter().filter(|&&s| set.contains(s)).count();
    Membership {
        in_j: i + j == k + l,
        in_j2: r >= 2,
        in_r2: left == right,
        tangential_positions: r,
        omega_identically_zero: left == right,
    }
}

/// Where a quartic monomial of `P₄` ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fate {
    /// Removed by `χ₄`; the payload is `min(#ξ, #η)` (0, 1 or 2).
    Removed(usize),
    Resonant,
    Remainder,
}

fn tangential_positions(m: &Monomial, set: &AdmissibleSet) -> usize {
    m.letters().filter(|v| set.contains(v.index())).count()
}

/// Same multiset of absolute values on both sides (two-two monomials only).
fn abs_balanced(m: &Monomial) -> bool {
    let mut a: Vec<i64> = m.xi().iter().map(|s| s.abs()).collect();
    let mut b: Vec<i64> = m.eta().iter().map(|s| s.abs()).collect();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

pub fn classify(m: &Monomial, set: &AdmissibleSet) -> Fate {
    let kind = m.xi().len().min(m.eta().len());
    let r = tangential_positions(m, set);
    match kind {
        0 => Fate::Removed(0),
        1 if r >= 2 => Fate::Removed(1),
        2 if r >= 2 && abs_balanced(m) => Fate::Resonant,
        2 if r >= 2 => Fate::Removed(2),
        _ => Fate::Remainder,
    }
}

/// Quadruple form of a quartic monomial, `ξ`-heavy side first.
pub fn quad_of(m: &Monomial) -> [i64; 4] {
    let (a, b) = if m.xi().len() >= m.eta().len() { (m.xi(), m.eta()) } else { (m.eta(), m.xi()) };
    let mut q = [0; 4];
    for (slot, v) in q.iter_mut().zip(a.iter().chain(b)) {
        *slot = *v;
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormConfig {
    /// Smallest admissible `|Σ_α λ − Σ_β λ|` over removed three-one and
    /// two-two monomials.
    pub gamma_gate: f64,
    /// Also assemble the degree-six part of the transformed Hamiltonian.
    pub with_remainder: bool,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        NormalFormConfig { gamma_gate: 1e-8, with_remainder: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormResult {
    pub modes: Vec<i64>,
    pub mass: f64,
    pub cutoff: i64,
    pub gamma_min: f64,
    pub gamma_quad: Option<[i64; 4]>,
    pub chi4: PolyHamiltonian,
    pub z4: PolyHamiltonian,
    pub q4: PolyHamiltonian,
    /// `{P₄, χ₄} + ½{{H₂, χ₄}, χ₄}`, when requested.
    pub r6_truncated: Option<PolyHamiltonian>,
    /// `max |{H₂,χ₄} − (Z₄ + Q₄ − P₄)| / max |P₄|`, coefficientwise.
    pub residual_norm: f64,
}

/// Solves `{H₂, χ₄} = Z₄ + Q₄ − P₄` monomial by monomial.
///
/// Each removed monomial with coefficient `c` and frequency `ω` gets
/// `χ₄`-coefficient `i c / ω`.
pub fn solve_homological(p4: &PolyHamiltonian, fs: &FrequencySystem, cfg: &NormalFormConfig) -> Result<NormalFormResult> {
    let set = fs.set();
    let cutoff = p4.cutoff();
    let (mut chi, mut z4, mut q4) = (
        PolyHamiltonian::zero(cutoff),
        PolyHamiltonian::zero(cutoff),
        PolyHamiltonian::zero(cutoff),
    );
    let mut gamma_min = f64::INFINITY;
    let mut gamma_quad = None;
    for (m, c) in p4.iter() {
        if m.degree() != 4 {
            return Err(Error::InvalidInput(format!("non-quartic monomial {m}")));
        }
        match classify(m, set) {
            Fate::Removed(kind) => {
                let w = m.frequency(fs);
                if kind > 0 && w.abs() < gamma_min {
                    gamma_min = w.abs();
                    gamma_quad = Some(quad_of(m));
                }
                chi.add_term(m.clone(), C64::new(0.0, 1.0) * c / w);
            }
            Fate::Resonant => z4.add_term(m.clone(), *c),
            Fate::Remainder => q4.add_term(m.clone(), *c),
        }
    }
    if gamma_min < cfg.gamma_gate {
        return Err(Error::GammaGate {
            quad: gamma_quad.expect("minimum attained"),
            value: gamma_min,
            gate: cfg.gamma_gate,
        });
    }
    let h2 = build_h2(cutoff, fs);
    let lhs = poisson_bracket(&h2, &chi)?;
    let rhs = z4.add(&q4)?.sub(p4)?;
    let residual_norm = lhs.max_abs_diff(&rhs) / p4.max_abs_coeff().max(f64::MIN_POSITIVE);
    let r6_truncated = if cfg.with_remainder {
        let a = poisson_bracket(p4, &chi)?;
        let b = poisson_bracket(&lhs, &chi)?.scale(C64::new(0.5, 0.0));
        Some(a.add(&b)?)
    } else {
        None
    };
    Ok(NormalFormResult {
        modes: set.modes().to_vec(),
        mass: fs.mass().value(),
        cutoff,
        gamma_min,
        gamma_quad,
        chi4: chi,
        z4,
        q4,
        r6_truncated,
        residual_norm,
    })
}

/// Counts from [`verify_zminus_vanishing`], keyed by the number of tangential
/// positions `r ∈ {2, 3, 4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZMinusReport {
    pub resonant_total: BTreeMap<usize, usize>,
    pub action: BTreeMap<usize, usize>,
    pub non_action: BTreeMap<usize, usize>,
    /// Non-action resonant quadruples found by enumeration.
    pub surviving: Vec<[i64; 4]>,
    /// Non-action monomials actually present in `Z₄`.
    pub z4_non_action: Vec<Monomial>,
}

impl ZMinusReport {
    pub fn all_empty(&self) -> bool {
        self.surviving.is_empty() && self.z4_non_action.is_empty()
    }
}

/// Enumerates every resonant quadruple `i + j = k + l`,
/// `{|i|,|j|} = {|k|,|l|}`, with at least two tangential positions within
/// the cutoff, and records which ones are not pure action monomials.
pub fn verify_zminus_vanishing(nf: &NormalFormResult, set: &AdmissibleSet) -> ZMinusReport {
    let s = nf.cutoff;
    let mut rep = ZMinusReport {
        resonant_total: (2..=4).map(|r| (r, 0)).collect(),
        action: (2..=4).map(|r| (r, 0)).collect(),
        non_action: (2..=4).map(|r| (r, 0)).collect(),
        surviving: Vec::new(),
        z4_non_action: Vec::new(),
    };
    for i in -s..=s {
        for j in i..=s {
            for k in -s..=s {
                let l = i + j - k;
                if l < k || l.abs() > s {
                    continue;
                }
                let mem = resonance_membership([i, j, k, l], set);
                if !(mem.in_j && mem.in_j2 && mem.in_r2) {
                    continue;
                }
                let r = mem.tangential_positions;
                *rep.resonant_total.get_mut(&r).unwrap() += 1;
                if Monomial::new(vec![i, j], vec![k, l]).is_action() {
                    *rep.action.get_mut(&r).unwrap() += 1;
                } else {
                    *rep.non_action.get_mut(&r).unwrap() += 1;
                    rep.surviving.push([i, j, k, l]);
                }
            }
        }
    }
    rep.z4_non_action = nf.z4.iter().filter(|(m, _)| !m.is_action()).map(|(m, _)| m.clone()).collect();
    rep
}

/// `(l, k, coefficient of I_l I_k in Z₄)` for `l ≤ k` in `𝒜`.
pub fn z4_action_table(nf: &NormalFormResult) -> Vec<(i64, i64, f64)> {
    let mut out = Vec::new();
    for (x, &l) in nf.modes.iter().enumerate() {
        for &k in &nf.modes[x..] {
            let c = nf.z4.coeff(&Monomial::new(vec![l, k], vec![l, k]));
            out.push((l, k, c.re));
        }
    }
    out
}

/// `(3/4π)(4 − 3δ_{lk}) / (λ_l λ_k)`.
pub fn z4_action_formula(fs: &FrequencySystem, l: i64, k: i64) -> f64 {
    let d = if l == k { 1.0 } else { 0.0 };
    3.0 / (4.0 * PI) * (4.0 - 3.0 * d) / (fs.lambda(l) * fs.lambda(k))
}

/// Frequency modulation matrix `M_{kl} = (3/2π)(4 − 3δ_{kl}) / (λ_k λ_l)`.
pub fn modulation_matrix(fs: &FrequencySystem) -> DMatrix<f64> {
    let modes = fs.set().modes();
    let n = modes.len();
    DMatrix::from_fn(n, n, |r, c| {
        let d = if r == c { 1.0 } else { 0.0 };
        3.0 / (2.0 * PI) * (4.0 - 3.0 * d) / (fs.lambda(modes[r]) * fs.lambda(modes[c]))
    })
}

/// `(3/2π)ⁿ (∏ λ_l⁻²) (4n − 3)(−3)^{n−1}`.
pub fn modulation_determinant_formula(fs: &FrequencySystem) -> f64 {
    let n = fs.set().n() as i32;
    let prod: f64 = fs.omega().iter().map(|l| l.powi(-2)).product();
    (3.0 / (2.0 * PI)).powi(n) * prod * (4.0 * n as f64 - 3.0) * (-3f64).powi(n - 1)
}

/// Action Hessian `∂²Z₄/∂I_k∂I_l` read off the computed `Z₄` coefficients.
///
/// The off-diagonal entries are `3/(π λ_k λ_l)`, half of the corresponding
/// entries of [`modulation_matrix`].
pub fn modulation_from_z4(nf: &NormalFormResult) -> DMatrix<f64> {
    let n = nf.modes.len();
    DMatrix::from_fn(n, n, |r, c| {
        let (l, k) = (nf.modes[r], nf.modes[c]);
        let coeff = nf.z4.coeff(&Monomial::new(vec![l, k], vec![l, k])).re;
        if r == c { 2.0 * coeff } else { coeff }
    })
}

/// Coefficient of `I_l ξ_s η_s` in `Z₄` for each `l ∈ 𝒜`.
pub fn normal_shift_from_z4(nf: &NormalFormResult, s: i64) -> Vec<f64> {
    nf.modes
        .iter()
        .map(|&l| nf.z4.coeff(&Monomial::new(vec![l, s], vec![l, s])).re)
        .collect()
}

/// Size of the part of the rescaled perturbation that survives at
/// `r = 0, ζ = 0`: value, `∇_r`, `∇_ζ` and `∇²_ζ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub value: f64,
    pub grad_r: f64,
    pub grad_zeta: f64,
    pub hess_zeta: f64,
    /// Contribution of each source (`r2`, `r_zeta2`, `q4`) to the sum of the
    /// four entries above.
    pub sources: BTreeMap<String, f64>,
}

/// One term `c · ∏ r_{a} · ζ^{monomial}` of the explicit rescaled perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTerm {
    pub coeff: f64,
    /// Tangential modes carrying an `r` factor, with repetition.
    pub r: Vec<i64>,
    /// Normal-variable factor.
    pub zeta: Monomial,
    pub source: String,
}

/// Frequencies and perturbation after `I = ν(ρ + r)`, `ζ → √ν ζ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledNormalForm {
    pub fs: FrequencySystem,
    pub nu: f64,
    pub rho: Vec<f64>,
    /// Unperturbed tangential frequencies `ω`.
    pub omega0: Vec<f64>,
    /// `Ω(ρ) = ω + ν M ρ`.
    pub omega: Vec<f64>,
    pub m: DMatrix<f64>,
    /// `∂²Z₄/∂I∂I` from the computed normal form.
    pub m_z4: DMatrix<f64>,
    pub f_terms: Vec<ActionTerm>,
    pub jet: Jet,
    /// `ν` below which `|Λ_a − λ_a| ≤ 1/16` for all `ρ ∈ [1,2]ⁿ`.
    pub nu_max: f64,
}

impl RescaledNormalForm {
    /// `Ω(ρ) = ω + ν M ρ`.
    pub fn omega_at(&self, rho: &[f64]) -> Vec<f64> {
        let shift = &self.m * nalgebra::DVector::from_column_slice(rho);
        self.omega0.iter().zip(shift.iter()).map(|(w, d)| w + self.nu * d).collect()
    }

    /// `Σ_l ρ_l / λ_l`.
    pub fn weighted_rho(&self, rho: &[f64]) -> f64 {
        self.fs.omega().iter().zip(rho).map(|(l, r)| r / l).sum()
    }

    /// `Λ_s(ρ) = λ_s + ν (3/π) (1/λ_s) Σ_l ρ_l/λ_l`.
    pub fn lambda_at(&self, s: i64, rho: &[f64]) -> f64 {
        let l = self.fs.lambda(s);
        l + self.nu * 3.0 / PI / l * self.weighted_rho(rho)
    }

    /// `∂_ρ Λ_s`, constant in `ρ`.
    pub fn lambda_gradient(&self, s: i64) -> Vec<f64> {
        let l = self.fs.lambda(s);
        self.fs.omega().iter().map(|w| self.nu * 3.0 / PI / (l * w)).collect()
    }

    /// `Λ_s` at the stored `ρ`.
    pub fn lambda(&self, s: i64) -> f64 {
        self.lambda_at(s, &self.rho)
    }

    /// `C` with `|Λ_a − λ_a| ≤ C ν |a|⁻¹` for `a ≠ 0` and `ρ ∈ [1,2]ⁿ`.
    pub fn lambda_shift_constant(&self) -> f64 {
        3.0 / PI * self.fs.omega().iter().map(|l| 2.0 / l).sum::<f64>()
    }

    /// `C` with `|Ω_k − ω_k| ≤ C ν` for `ρ ∈ [1,2]ⁿ`.
    pub fn omega_shift_constant(&self) -> f64 {
        self.m.row_iter().map(|r| 2.0 * r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Eigenvalues of `J A` for the normal block `Λ_s ξ_s η_s` written in
    /// real coordinates, `A = Λ_s I₂`.
    pub fn quadratic_block_spectrum(&self, s: i64) -> [C64; 2] {
        let l = self.lambda(s);
        let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
        let a = Matrix2::new(l, 0.0, 0.0, l);
        let ev = (j * a).complex_eigenvalues();
        [ev[0], ev[1]]
    }

    pub fn within_validity(&self) -> bool {
        self.nu <= self.nu_max
    }
}

fn jet_of(terms: &[ActionTerm], q4: &PolyHamiltonian, set: &AdmissibleSet, nu: f64, rho: &[f64]) -> Jet {
    let mut jet = Jet { value: 0.0, grad_r: 0.0, grad_zeta: 0.0, hess_zeta: 0.0, sources: BTreeMap::new() };
    let add = |jet: &mut Jet, r_deg: usize, z_deg: usize, size: f64, source: &str| {
        let slot = match (r_deg, z_deg) {
            (0, 0) => &mut jet.value,
            (1, 0) => &mut jet.grad_r,
            (0, 1) => &mut jet.grad_zeta,
            (0, 2) => &mut jet.hess_zeta,
            _ => return,
        };
        *slot += size;
        *jet.sources.entry(source.to_string()).or_default() += size;
    };
    for t in terms {
        jet.sources.entry(t.source.clone()).or_default();
        add(&mut jet, t.r.len(), t.zeta.degree(), t.coeff.abs(), &t.source);
    }
    jet.sources.entry("q4".into()).or_default();
    for (m, c) in q4.iter() {
        // ν⁻¹ · ν² · |c| · ∏_{tangential} √ρ_a at r = 0
        let amp: f64 = m
            .letters()
            .filter_map(|v| set.position(v.index()))
            .map(|p| rho[p].sqrt())
            .product();
        let z_deg = m.letters().filter(|v| set.is_normal(v.index())).count();
        add(&mut jet, 0, z_deg, nu * c.norm() * amp, "q4");
    }
    jet
}

/// Builds the rescaled frequencies and the explicit perturbation.
pub fn rescale(nf: &NormalFormResult, fs: &FrequencySystem, nu: f64, rho: &[f64]) -> Result<RescaledNormalForm> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("nu must be positive, got {nu}")));
    }
    let set = fs.set();
    if rho.len() != set.n() {
        return Err(Error::InvalidInput("rho has wrong dimension".into()));
    }
    let m = modulation_matrix(fs);
    let m_z4 = modulation_from_z4(nf);
    let omega0 = fs.omega();
    let mut f_terms = Vec::new();
    for (x, &l) in nf.modes.iter().enumerate() {
        for &a in &nf.modes[x..] {
            let c = nf.z4.coeff(&Monomial::new(vec![l, a], vec![l, a])).re;
            f_terms.push(ActionTerm { coeff: nu * c, r: vec![l, a], zeta: Monomial::one(), source: "r2".into() });
        }
    }
    for s in set.normal_modes(nf.cutoff) {
        for (&l, c) in nf.modes.iter().zip(normal_shift_from_z4(nf, s)) {
            if c != 0.0 {
                f_terms.push(ActionTerm { coeff: nu * c, r: vec![l], zeta: Monomial::action(s), source: "r_zeta2".into() });
            }
        }
    }
    let jet = jet_of(&f_terms, &nf.q4, set, nu, rho);
    let shift_c = 3.0 / PI * omega0.iter().map(|l| 2.0 / l).sum::<f64>();
    let mut out = RescaledNormalForm {
        fs: fs.clone(),
        nu,
        rho: rho.to_vec(),
        omega0,
        omega: Vec::new(),
        m,
        m_z4,
        f_terms,
        jet,
        nu_max: 1.0 / (16.0 * shift_c),
    };
    out.omega = out.omega_at(rho);
    Ok(out)
}

/// Text form: a header of `# key=value` lines followed by the three
/// polynomials, each introduced by `# section <name>`.
pub fn to_text(nf: &NormalFormResult) -> String {
    let modes: Vec<String> = nf.modes.iter().map(|a| a.to_string()).collect();
    let mut s = format!(
        "# modes={}\n# mass={:e}\n# cutoff={}\n# gamma_min={:e}\n# residual_norm={:e}\n",
        modes.join(","),
        nf.mass,
        nf.cutoff,
        nf.gamma_min,
        nf.residual_norm
    );
    for (name, p) in [("chi4", &nf.chi4), ("Z4", &nf.z4), ("Q4", &nf.q4)] {
        s.push_str(&format!("# section {name}\n"));
        s.push_str(&p.to_text());
    }
    s
}

/// Header fields of [`to_text`] output.
pub fn parse_header(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix("# ") else { break };
        if rest.starts_with("section") {
            break;
        }
        let (k, v) = rest.split_once('=').ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))?;
        out.insert(k.to_string(), v.to_string());
    }
    for key in ["modes", "mass", "cutoff", "gamma_min", "residual_norm"] {
        if !out.contains_key(key) {
            return Err(Error::Parse(format!("missing header field {key}")));
        }
    }
    Ok(out)
}

/// Polynomials stored in [`to_text`] output, keyed by section name.
pub fn parse_sections(text: &str) -> Result<BTreeMap<String, PolyHamiltonian>> {
    let mut out = BTreeMap::new();
    let mut current: Option<(String, String)> = None;
    for line in text.lines() {
        if let Some(name) = line.strip_prefix("# section ") {
            if let Some((n, body)) = current.take() {
                out.insert(n, PolyHamiltonian::from_text(&body)?);
            }
            current = Some((name.trim().to_string(), String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    if let Some((n, body)) = current {
        out.insert(n, PolyHamiltonian::from_text(&body)?);
    }
    Ok(out)
}
