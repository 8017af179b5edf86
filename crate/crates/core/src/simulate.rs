//! Galerkin truncation of `u_tt − u_xx + m u + 4u³ = 0` on `|s| ≤ K`,
//! integrated in the complex coordinates `(ξ_s, η_s)` with
//! `ξ̇_s = i ∂H/∂η_s`, `η̇_s = −i ∂H/∂ξ_s`, plus diagnostics comparing the
//! trajectory with the linear torus family and the first-order frequency
//! shift.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::birkhoff::{modulation_from_z4, modulation_matrix, solve_homological, NormalFormConfig};
use crate::error::{Error, Result};
use crate::polyham::{bracket, build_p4, PhasePoint, C64};
use crate::spectrum::{frequency, AdmissibleSet, FrequencySystem, Mass};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    /// Exact linear rotation, exact nonlinear kick, rotation.
    StrangSplit,
    /// Implicit midpoint rule solved by fixed-point iteration.
    ImplicitMidpoint,
}

/// Uniform noise of the given amplitude on every normal mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Galerkin mode bound `K`.
    pub cutoff: i64,
    pub mass: f64,
    pub modes: Vec<i64>,
    /// Actions `I_a = ν ρ_a`, one per tangential mode.
    pub actions: Vec<f64>,
    pub theta0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub nonlinearity_on: bool,
    pub integrator: IntegratorKind,
    /// Number of stored samples (besides `t = 0`).
    pub samples: usize,
    pub noise: Option<Noise>,
    /// Sobolev index of the torus distance.
    pub alpha: f64,
}

impl SimConfig {
    /// Defaults: Strang splitting, nonlinearity on, 4000 samples, zero
    /// initial angles, `α = 1`.
    pub fn new(cutoff: i64, mass: f64, modes: Vec<i64>, actions: Vec<f64>, dt: f64, t_end: f64) -> Self {
        let n = modes.len();
        SimConfig {
            cutoff,
            mass,
            modes,
            actions,
            theta0: vec![0.0; n],
            dt,
            t_end,
            nonlinearity_on: true,
            integrator: IntegratorKind::StrangSplit,
            samples: 4000,
            noise: None,
            alpha: 1.0,
        }
    }

    /// Checks the gates and returns the frequency system.
    pub fn validate(&self) -> Result<FrequencySystem> {
        let mass = Mass::new(self.mass)?;
        let set = AdmissibleSet::new(&self.modes)?;
        if self.cutoff < set.n_bound() {
            return Err(Error::InvalidInput(format!(
                "cutoff {} below the largest tangential mode {}",
                self.cutoff,
                set.n_bound()
            )));
        }
        if self.actions.len() != set.n() || self.theta0.len() != set.n() {
            return Err(Error::InvalidInput("actions and theta0 need one entry per mode".into()));
        }
        if self.actions.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidInput("actions must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::InvalidInput("dt and t_end must be positive".into()));
        }
        let top = frequency(self.cutoff, mass);
        if self.dt * top > 0.5 {
            return Err(Error::InvalidInput(format!(
                "dt·max frequency = {:.3} exceeds 0.5",
                self.dt * top
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidInput("samples must be at least 1".into()));
        }
        // Modes follow the sorted order of the admissible set.
        let mut order: Vec<usize> = (0..self.modes.len()).collect();
        order.sort_by_key(|&i| self.modes[i]);
        if order.iter().enumerate().any(|(i, &j)| i != j) {
            return Err(Error::InvalidInput("modes must be listed in increasing order".into()));
        }
        Ok(FrequencySystem::new(mass, set))
    }
}

/// Smallest power of two `≥ 2(2K + 1)`, enough to integrate `u⁴` exactly.
pub fn grid_size(cutoff: i64) -> usize {
    (2 * (2 * cutoff as usize + 1)).next_power_of_two()
}

/// Pseudo-spectral evaluation of the quartic potential `P = ∫ u⁴ dx` and
/// its gradient on a zero-padded grid.
pub struct Galerkin {
    cutoff: i64,
    grid: usize,
    lambda: Vec<f64>,
    /// `1/√(2λ_s)`.
    weight: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<C64>,
    scratch: Vec<C64>,
    pub nonlinear: bool,
}

impl Galerkin {
    pub fn new(cutoff: i64, mass: Mass) -> Self {
        let grid = grid_size(cutoff);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid);
        let inverse = planner.plan_fft_inverse(grid);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let lambda: Vec<f64> = (-cutoff..=cutoff).map(|s| frequency(s, mass)).collect();
        let weight = lambda.iter().map(|l| 1.0 / (2.0 * l).sqrt()).collect();
        Galerkin {
            cutoff,
            grid,
            lambda,
            weight,
            forward,
            inverse,
            buf: vec![ZERO; grid],
            scratch: vec![ZERO; scratch_len],
            nonlinear: true,
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    fn slot(&self, s: i64) -> usize {
        (s + self.cutoff) as usize
    }

    fn bin(&self, s: i64) -> usize {
        s.rem_euclid(self.grid as i64) as usize
    }

    /// `u(x_j)` at `x_j = 2πj/grid`, complex off the real subspace.
    pub fn field(&mut self, z: &PhasePoint) -> Vec<C64> {
        self.fill_field(z);
        self.buf.clone()
    }

    fn fill_field(&mut self, z: &PhasePoint) {
        self.buf.iter_mut().for_each(|x| *x = ZERO);
        for s in -self.cutoff..=self.cutoff {
            let i = self.slot(s);
            let j = self.slot(-s);
            let c = (z.xi[i] + z.eta[j]) * self.weight[i];
            let b = self.bin(s);
            self.buf[b] = c;
        }
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = 1.0 / (2.0 * PI).sqrt();
        self.buf.iter_mut().for_each(|x| *x *= norm);
    }

    /// `∫ u⁴ dx`, exact on the truncated phase space.
    pub fn potential(&mut self, z: &PhasePoint) -> C64 {
        self.fill_field(z);
        let h = 2.0 * PI / self.grid as f64;
        self.buf.iter().map(|u| u * u * u * u).sum::<C64>() * h
    }

    /// `H = Σ λ_s ξ_s η_s + ∫u⁴`, real part.
    pub fn hamiltonian(&mut self, z: &PhasePoint) -> f64 {
        let quad: C64 = (0..z.xi.len()).map(|i| z.xi[i] * z.eta[i] * self.lambda[i]).sum();
        let quartic = if self.nonlinear { self.potential(z) } else { ZERO };
        (quad + quartic).re
    }

    /// `(∂P/∂ξ_s, ∂P/∂η_s)`.
    pub fn potential_gradient(&mut self, z: &PhasePoint) -> PhasePoint {
        self.fill_field(z);
        self.buf.iter_mut().for_each(|u| *u = 4.0 * *u * *u * *u);
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        // ∫ 4u³ e^{−isx} dx = (2π/grid)·FFT[s]; one more 1/√(2π) from φ.
        let scale = (2.0 * PI).sqrt() / self.grid as f64;
        let mut g = PhasePoint::zeros(self.cutoff);
        for s in -self.cutoff..=self.cutoff {
            let i = self.slot(s);
            let w = self.weight[i] * scale;
            g.eta[i] = self.buf[self.bin(s)] * w;
            g.xi[i] = self.buf[self.bin(-s)] * w;
        }
        g
    }

    /// `(i ∂H/∂η, −i ∂H/∂ξ)`.
    pub fn vector_field(&mut self, z: &PhasePoint) -> PhasePoint {
        let mut out = PhasePoint::zeros(self.cutoff);
        for i in 0..z.xi.len() {
            out.xi[i] = I * self.lambda[i] * z.xi[i];
            out.eta[i] = -I * self.lambda[i] * z.eta[i];
        }
        if self.nonlinear {
            let g = self.potential_gradient(z);
            for i in 0..z.xi.len() {
                out.xi[i] += I * g.eta[i];
                out.eta[i] -= I * g.xi[i];
            }
        }
        out
    }

    fn rotate(&self, z: &mut PhasePoint, tau: f64) {
        for i in 0..z.xi.len() {
            let r = C64::from_polar(1.0, self.lambda[i] * tau);
            z.xi[i] *= r;
            z.eta[i] *= r.conj();
        }
    }

    /// The field is constant along the flow of `P`, so the kick is exact.
    fn kick(&mut self, z: &mut PhasePoint, tau: f64) {
        if !self.nonlinear {
            return;
        }
        let g = self.potential_gradient(z);
        for i in 0..z.xi.len() {
            z.xi[i] += I * tau * g.eta[i];
            z.eta[i] -= I * tau * g.xi[i];
        }
    }

    pub fn step_strang(&mut self, z: &mut PhasePoint, dt: f64) {
        self.rotate(z, 0.5 * dt);
        self.kick(z, dt);
        self.rotate(z, 0.5 * dt);
    }

    pub fn step_midpoint(&mut self, z: &mut PhasePoint, dt: f64) -> Result<()> {
        let start = z.clone();
        let mut next = z.clone();
        self.step_strang(&mut next, dt);
        for _ in 0..100 {
            let mut mid = start.clone();
            for i in 0..mid.xi.len() {
                mid.xi[i] = 0.5 * (start.xi[i] + next.xi[i]);
                mid.eta[i] = 0.5 * (start.eta[i] + next.eta[i]);
            }
            let f = self.vector_field(&mid);
            let mut change: f64 = 0.0;
            let mut size: f64 = 0.0;
            for i in 0..mid.xi.len() {
                let x = start.xi[i] + dt * f.xi[i];
                let e = start.eta[i] + dt * f.eta[i];
                change = change.max((x - next.xi[i]).norm()).max((e - next.eta[i]).norm());
                size = size.max(x.norm()).max(e.norm());
                next.xi[i] = x;
                next.eta[i] = e;
            }
            if change <= 1e-15 * (1.0 + size) {
                *z = next;
                return Ok(());
            }
        }
        Err(Error::Precondition("implicit midpoint iteration did not converge".into()))
    }

    /// `steps` steps of size `dt` (negative `dt` runs backwards).
    pub fn evolve(&mut self, z: &mut PhasePoint, dt: f64, steps: usize, kind: IntegratorKind) -> Result<()> {
        for _ in 0..steps {
            match kind {
                IntegratorKind::StrangSplit => self.step_strang(z, dt),
                IntegratorKind::ImplicitMidpoint => self.step_midpoint(z, dt)?,
            }
        }
        Ok(())
    }
}

/// Point of the linear torus: `ξ_a = √I_a e^{iθ_a}` on the tangential
/// modes, zero elsewhere, `η = conj(ξ)`.
pub fn torus_point(cutoff: i64, set: &AdmissibleSet, actions: &[f64], theta: &[f64]) -> PhasePoint {
    let mut xi = vec![ZERO; (2 * cutoff + 1) as usize];
    for ((&a, &act), &th) in set.modes().iter().zip(actions).zip(theta) {
        xi[(a + cutoff) as usize] = C64::from_polar(act.sqrt(), th);
    }
    PhasePoint::real(cutoff, xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldComponent {
    Value,
    TimeDerivative,
    SpaceDerivative,
}

/// The quasi-periodic solution of the linear equation,
/// `u(θ₀ + tω, x) = Σ_a √I_a (e^{iθ_a} φ_a(x) + e^{−iθ_a} φ_{−a}(x)) / (√2 (a² + m)^{1/4})`,
/// or one of its first derivatives.
pub fn linear_torus_field(
    set: &AdmissibleSet,
    actions: &[f64],
    mass: Mass,
    theta0: &[f64],
    t: f64,
    xs: &[f64],
    component: FieldComponent,
) -> Result<Vec<f64>> {
    if actions.len() != set.n() || theta0.len() != set.n() {
        return Err(Error::InvalidInput("actions and theta0 need one entry per mode".into()));
    }
    if actions.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput("actions must be positive".into()));
    }
    let norm = 1.0 / (2.0 * PI).sqrt();
    Ok(xs
        .iter()
        .map(|&x| {
            set.modes()
                .iter()
                .zip(actions)
                .zip(theta0)
                .map(|((&a, &act), &th)| {
                    let w = frequency(a, mass);
                    let amp = act.sqrt() / (2f64.sqrt() * w.sqrt()) * norm;
                    let phase = th + t * w + a as f64 * x;
                    // e^{iθ}e^{iax} + c.c. = 2 cos(θ + ax)
                    match component {
                        FieldComponent::Value => 2.0 * amp * phase.cos(),
                        FieldComponent::TimeDerivative => -2.0 * amp * w * phase.sin(),
                        FieldComponent::SpaceDerivative => -2.0 * amp * a as f64 * phase.sin(),
                    }
                })
                .sum()
        })
        .collect())
}

/// [`linear_torus_field`] with [`FieldComponent::Value`].
pub fn linear_torus_solution(
    set: &AdmissibleSet,
    actions: &[f64],
    mass: Mass,
    theta0: &[f64],
    t: f64,
    xs: &[f64],
) -> Result<Vec<f64>> {
    linear_torus_field(set, actions, mass, theta0, t, xs, FieldComponent::Value)
}

/// Stored samples of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusTrajectory {
    pub modes: Vec<i64>,
    pub mass: f64,
    pub cutoff: i64,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub energy: Vec<f64>,
    /// `|ξ_a|²` per sample and tangential mode.
    pub actions: Vec<Vec<f64>>,
    /// `arg ξ_a` per sample and tangential mode, in `(−π, π]`.
    pub phases: Vec<Vec<f64>>,
    /// `Σ s ξ_s η_s`.
    pub momentum: Vec<f64>,
    pub reality_defect: Vec<f64>,
    pub extracted_frequencies: BTreeMap<i64, f64>,
    pub sup_distance: Option<f64>,
}

impl TorusTrajectory {
    pub fn set(&self) -> Result<AdmissibleSet> {
        AdmissibleSet::new(&self.modes)
    }

    /// `max_t |H(t) − H(0)| / |H(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.energy[0];
        self.energy.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / h0.abs()
    }

    pub fn max_reality_defect(&self) -> f64 {
        self.reality_defect.iter().copied().fold(0.0, f64::max)
    }

    /// `max_t |p(t) − p(0)| / Σ|s||ξ_s|²(0)`, or the absolute drift when the
    /// scale vanishes.
    pub fn momentum_drift(&self) -> f64 {
        let p0 = self.momentum[0];
        let z = &self.states[0];
        let scale: f64 = z.modes().map(|s| s.abs() as f64 * z.xi[z.slot(s)].norm_sqr()).sum();
        let drift = self.momentum.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            drift / scale
        } else {
            drift
        }
    }
}

fn record(traj: &mut TorusTrajectory, gal: &mut Galerkin, set: &AdmissibleSet, t: f64, z: &PhasePoint) {
    traj.times.push(t);
    traj.energy.push(gal.hamiltonian(z));
    let tangential = set.modes().iter().map(|&a| z.xi[z.slot(a)]);
    traj.actions.push(tangential.clone().map(|x| x.norm_sqr()).collect());
    traj.phases.push(tangential.map(|x| x.arg()).collect());
    traj.momentum.push(z.modes().map(|s| s as f64 * (z.xi[z.slot(s)] * z.eta[z.slot(s)]).re).sum());
    traj.reality_defect.push(z.reality_defect());
    traj.states.push(z.clone());
}

/// Initial state: the linear torus at `θ₀`, plus the optional noise on
/// normal modes.
pub fn initial_state(cfg: &SimConfig, set: &AdmissibleSet) -> PhasePoint {
    let mut z = torus_point(cfg.cutoff, set, &cfg.actions, &cfg.theta0);
    if let Some(noise) = cfg.noise {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for s in set.normal_modes(cfg.cutoff) {
            let v = C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)) * noise.amplitude;
            let i = z.slot(s);
            z.xi[i] = v;
            z.eta[i] = v.conj();
        }
    }
    z
}

/// Runs the configuration, returning whatever was stored together with the
/// error that stopped the run, if any.
pub fn integrate_partial(cfg: &SimConfig) -> Result<(TorusTrajectory, Option<Error>)> {
    let fs = cfg.validate()?;
    let set = fs.set().clone();
    let mut gal = Galerkin::new(cfg.cutoff, fs.mass());
    gal.nonlinear = cfg.nonlinearity_on;
    let steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let stride = (steps / cfg.samples).max(1);
    let mut traj = TorusTrajectory {
        modes: set.modes().to_vec(),
        mass: cfg.mass,
        cutoff: cfg.cutoff,
        dt: cfg.dt,
        steps,
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        actions: Vec::new(),
        phases: Vec::new(),
        momentum: Vec::new(),
        reality_defect: Vec::new(),
        extracted_frequencies: BTreeMap::new(),
        sup_distance: None,
    };
    let mut z = initial_state(cfg, &set);
    let norm0: f64 = z.xi.iter().chain(&z.eta).map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    record(&mut traj, &mut gal, &set, 0.0, &z);
    let mut failure = None;
    for n in 1..=steps {
        let step = match cfg.integrator {
            IntegratorKind::StrangSplit => {
                gal.step_strang(&mut z, cfg.dt);
                Ok(())
            }
            IntegratorKind::ImplicitMidpoint => gal.step_midpoint(&mut z, cfg.dt),
        };
        if let Err(e) = step {
            failure = Some(e);
            break;
        }
        let norm: f64 = z.xi.iter().chain(&z.eta).map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 10.0 * norm0 {
            failure = Some(Error::BlowUp { time: n as f64 * cfg.dt, growth: norm / norm0 });
            break;
        }
        if n % stride == 0 || n == steps {
            record(&mut traj, &mut gal, &set, n as f64 * cfg.dt, &z);
        }
    }
    if failure.is_none() {
        if let Ok(freq) = extract_frequencies(&traj, &set) {
            traj.extracted_frequencies = freq;
        }
        traj.sup_distance = Some(torus_distance(&traj, &cfg.actions, cfg.alpha)?);
    }
    Ok((traj, failure))
}

/// Runs the configuration; blow-up and solver failures become errors.
pub fn integrate(cfg: &SimConfig) -> Result<TorusTrajectory> {
    match integrate_partial(cfg)? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// Least-squares slope of the unwrapped phase of `ξ_a` for each tangential
/// mode. Unwrapping follows the linear frequency `λ_a`, so samples may be
/// further apart than half a period as long as the frequency shift per
/// sample interval stays below `π`.
pub fn extract_frequencies(traj: &TorusTrajectory, set: &AdmissibleSet) -> Result<BTreeMap<i64, f64>> {
    let n = traj.times.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("{n} samples are too few for a phase fit")));
    }
    let mass = Mass::new(traj.mass)?;
    let horizon = traj.times[n - 1] - traj.times[0];
    let mut out = BTreeMap::new();
    for (p, &a) in set.modes().iter().enumerate() {
        let lam = frequency(a, mass);
        if horizon * lam / (2.0 * PI) < 100.0 {
            return Err(Error::InvalidInput(format!(
                "horizon {horizon} covers fewer than 100 periods of mode {a}"
            )));
        }
        let mut unwrapped = Vec::with_capacity(n);
        unwrapped.push(traj.phases[0][p]);
        for i in 1..n {
            let expected = lam * (traj.times[i] - traj.times[i - 1]);
            let raw = traj.phases[i][p] - traj.phases[i - 1][p] - expected;
            let wrapped = raw - 2.0 * PI * (raw / (2.0 * PI)).round();
            unwrapped.push(unwrapped[i - 1] + expected + wrapped);
        }
        let tm = traj.times.iter().sum::<f64>() / n as f64;
        let pm = unwrapped.iter().sum::<f64>() / n as f64;
        let sxy: f64 = traj.times.iter().zip(&unwrapped).map(|(t, y)| (t - tm) * (y - pm)).sum();
        let sxx: f64 = traj.times.iter().map(|t| (t - tm).powi(2)).sum();
        let slope = sxy / sxx;
        let rms = (traj
            .times
            .iter()
            .zip(&unwrapped)
            .map(|(t, y)| (y - pm - slope * (t - tm)).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        if rms > 0.1 {
            return Err(Error::PhaseIncoherence { mode: a, rms });
        }
        out.insert(a, slope.abs());
    }
    Ok(out)
}

/// `min_θ ‖u − u_{I,m}(θ)‖_{H^α}` for one state. The phase of each
/// tangential pair `(a, −a)` is aligned in closed form.
pub fn torus_profile_distance(z: &PhasePoint, set: &AdmissibleSet, actions: &[f64], mass: Mass, alpha: f64) -> f64 {
    let k = z.cutoff;
    // Fourier coefficient of u at mode s: (ξ_s + η_{−s})/√(2λ_s).
    let coeff = |s: i64| {
        if s.abs() > k {
            return ZERO;
        }
        (z.xi[z.slot(s)] + z.eta[z.slot(-s)]) / (2.0 * frequency(s, mass)).sqrt()
    };
    let weight = |s: i64| bracket(s).powf(2.0 * alpha);
    let mut total = 0.0;
    let mut paired = std::collections::BTreeSet::new();
    for (&a, &act) in set.modes().iter().zip(actions) {
        let r = act.sqrt() / (2.0 * frequency(a, mass)).sqrt();
        if a == 0 {
            // Reference coefficient 2r cos θ is real.
            let c = coeff(0);
            let cos = (c.re / (2.0 * r)).clamp(-1.0, 1.0);
            total += weight(0) * (c - 2.0 * r * cos).norm_sqr();
            paired.insert(0);
        } else {
            let (x, y) = (coeff(a), coeff(-a));
            let target = x + y.conj();
            let e = if target.norm() > 0.0 { target / target.norm() } else { C64::new(1.0, 0.0) };
            total += weight(a) * ((x - r * e).norm_sqr() + (y - r * e.conj()).norm_sqr());
            paired.insert(a);
            paired.insert(-a);
        }
    }
    for s in -k..=k {
        if !paired.contains(&s) {
            total += weight(s) * coeff(s).norm_sqr();
        }
    }
    total.sqrt()
}

/// Supremum over stored samples of [`torus_profile_distance`].
pub fn torus_distance(traj: &TorusTrajectory, actions: &[f64], alpha: f64) -> Result<f64> {
    let set = traj.set()?;
    let mass = Mass::new(traj.mass)?;
    Ok(traj
        .states
        .iter()
        .map(|z| torus_profile_distance(z, &set, actions, mass, alpha))
        .fold(0.0, f64::max))
}

/// Extracted frequencies against the first-order predictions `ω + M I`
/// (the modulation matrix) and `ω + ∂²Z₄ I` (the Hessian of the computed
/// normal form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyComparison {
    pub modes: Vec<i64>,
    pub omega: Vec<f64>,
    pub extracted: Vec<f64>,
    pub predicted: Vec<f64>,
    pub predicted_z4: Vec<f64>,
    pub gap: Vec<f64>,
    pub gap_z4: Vec<f64>,
}

impl FrequencyComparison {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(0.0, f64::max)
    }
}

pub fn compare_frequencies(traj: &TorusTrajectory, actions: &[f64]) -> Result<FrequencyComparison> {
    let set = traj.set()?;
    let fs = FrequencySystem::new(Mass::new(traj.mass)?, set.clone());
    let extracted_map = if traj.extracted_frequencies.is_empty() {
        extract_frequencies(traj, &set)?
    } else {
        traj.extracted_frequencies.clone()
    };
    let omega = fs.omega();
    let m = modulation_matrix(&fs);
    let nf = solve_homological(&build_p4(set.n_bound(), &fs), &fs, &NormalFormConfig::default())?;
    let mz = modulation_from_z4(&nf);
    let shift = |mat: &nalgebra::DMatrix<f64>| -> Vec<f64> {
        (0..set.n())
            .map(|i| omega[i] + (0..set.n()).map(|j| mat[(i, j)] * actions[j]).sum::<f64>())
            .collect()
    };
    let predicted = shift(&m);
    let predicted_z4 = shift(&mz);
    let extracted: Vec<f64> = set.modes().iter().map(|a| extracted_map[a]).collect();
    let gap = extracted.iter().zip(&predicted).map(|(e, p)| (e - p).abs()).collect();
    let gap_z4 = extracted.iter().zip(&predicted_z4).map(|(e, p)| (e - p).abs()).collect();
    Ok(FrequencyComparison { modes: set.modes().to_vec(), omega, extracted, predicted, predicted_z4, gap, gap_z4 })
}

/// Least-squares fit `y ≈ C x^p` in log-log coordinates; returns `(p, C)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("power-law fit needs two or more paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let p = sxy / sxx;
    Ok((p, (my - p * mx).exp()))
}

/// CSV with columns `t, energy, action_<a>…, phase_<a>…`.
pub fn write_trajectory_csv<W: Write>(traj: &TorusTrajectory, w: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "energy".to_string()];
    header.extend(traj.modes.iter().map(|a| format!("action_{a}")));
    header.extend(traj.modes.iter().map(|a| format!("phase_{a}")));
    out.write_record(&header).map_err(io)?;
    for i in 0..traj.times.len() {
        let mut row = vec![format!("{:e}", traj.times[i]), format!("{:e}", traj.energy[i])];
        row.extend(traj.actions[i].iter().map(|x| format!("{x:e}")));
        row.extend(traj.phases[i].iter().map(|x| format!("{x:e}")));
        out.write_record(&row).map_err(io)?;
    }
    out.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

/// Sidecar of a field snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub cutoff: i64,
    pub dt: f64,
    pub mass: f64,
    pub run_id: String,
    pub time: f64,
    /// Number of little-endian `f64` values: `u(2πj/points)` for `j < points`.
    pub points: usize,
}

/// Writes `<stem>.bin` (the real field on the collocation grid) and
/// `<stem>.json`.
pub fn write_snapshot(dir: &Path, stem: &str, z: &PhasePoint, meta_in: SnapshotMeta) -> std::io::Result<SnapshotMeta> {
    let mass = Mass::new(meta_in.mass).map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut gal = Galerkin::new(z.cutoff, mass);
    let field = gal.field(z);
    let mut bytes = Vec::with_capacity(field.len() * 8);
    for u in &field {
        bytes.extend_from_slice(&u.re.to_le_bytes());
    }
    std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let meta = SnapshotMeta { points: field.len(), ..meta_in };
    let json = serde_json::to_string_pretty(&meta).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(meta)
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(dir: &Path, stem: &str) -> std::io::Result<(SnapshotMeta, Vec<f64>)> {
    let meta: SnapshotMeta = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)
        .map_err(std::io::Error::other)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((meta, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyham::gradient;
    use rand::SeedableRng;

    fn mass(m: f64) -> Mass {
        Mass::new(m).unwrap()
    }

    fn random_point(cutoff: i64, seed: u64, real: bool) -> PhasePoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = PhasePoint::zeros(cutoff);
        for i in 0..z.xi.len() {
            z.xi[i] = C64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            z.eta[i] = if real {
                z.xi[i].conj()
            } else {
                C64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
            };
        }
        z
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_size(32), 256);
        assert_eq!(grid_size(3), 16);
        assert!(grid_size(32) > 4 * 32);
    }

    #[test]
    fn collocation_matches_sparse_quartic() {
        let fs = FrequencySystem::new(mass(1.4), AdmissibleSet::new(&[1]).unwrap());
        let cutoff = 3;
        let p4 = build_p4(cutoff, &fs);
        let mut gal = Galerkin::new(cutoff, fs.mass());
        let z = random_point(cutoff, 7, false);
        let direct = p4.evaluate(&z);
        let colloc = gal.potential(&z);
        assert!((direct - colloc).norm() <= 1e-13 * direct.norm().max(1.0), "{direct} {colloc}");
        let g = gradient(&p4, &z);
        let gc = gal.potential_gradient(&z);
        for i in 0..z.xi.len() {
            assert!((g.xi[i] - gc.xi[i]).norm() < 1e-13);
            assert!((g.eta[i] - gc.eta[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn linear_reference_values() {
        let set = AdmissibleSet::new(&[0]).unwrap();
        for m in [1.0, 1.7] {
            let u = linear_torus_solution(&set, &[1.0], mass(m), &[0.0], 0.0, &[0.3, 2.0]).unwrap();
            let want = (1.0 / PI).sqrt() * m.powf(-0.25);
            assert!(u.iter().all(|v| (v - want).abs() < 1e-15));
        }
        // time shift equals angle shift
        let set = AdmissibleSet::new(&[0, 2, 3]).unwrap();
        let (act, th) = ([0.3, 0.2, 0.1], [0.1, 0.5, -1.0]);
        let xs: Vec<f64> = (0..16).map(|j| j as f64 * 0.4).collect();
        let w: Vec<f64> = set.modes().iter().map(|&a| frequency(a, mass(1.2))).collect();
        let s = 3.7;
        let shifted: Vec<f64> = th.iter().zip(&w).map(|(t, w)| t + s * w).collect();
        let u1 = linear_torus_solution(&set, &act, mass(1.2), &th, 1.0 + s, &xs).unwrap();
        let u2 = linear_torus_solution(&set, &act, mass(1.2), &shifted, 1.0, &xs).unwrap();
        assert!(u1.iter().zip(&u2).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn linear_energy_by_quadrature() {
        let set = AdmissibleSet::new(&[0, 2, 3]).unwrap();
        let (act, th, m) = ([0.3, 0.2, 0.1], [0.1, 0.5, -1.0], mass(1.2));
        let n = 2048;
        let xs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let energy = |t: f64| {
            let u = linear_torus_field(&set, &act, m, &th, t, &xs, FieldComponent::Value).unwrap();
            let ut = linear_torus_field(&set, &act, m, &th, t, &xs, FieldComponent::TimeDerivative).unwrap();
            let ux = linear_torus_field(&set, &act, m, &th, t, &xs, FieldComponent::SpaceDerivative).unwrap();
            (0..n).map(|j| 0.5 * (ut[j].powi(2) + ux[j].powi(2) + m.value() * u[j].powi(2))).sum::<f64>()
                * (2.0 * PI / n as f64)
        };
        let e0 = energy(0.0);
        // Energy equals Σ λ_a I_a.
        let want: f64 = set.modes().iter().zip(&act).map(|(&a, i)| frequency(a, m) * i).sum();
        assert!((e0 - want).abs() < 1e-12);
        for t in [0.7, 13.0, 101.5] {
            assert!((energy(t) - e0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_run_stays_on_torus() {
        let mut cfg = SimConfig::new(6, 1.3, vec![1, 3], vec![0.01, 0.02], 0.05, 600.0);
        cfg.nonlinearity_on = false;
        cfg.theta0 = vec![0.3, -0.2];
        cfg.samples = 600;
        let traj = integrate(&cfg).unwrap();
        assert!(traj.sup_distance.unwrap() < 1e-10);
        let m = mass(1.3);
        for (a, w) in &traj.extracted_frequencies {
            assert!((w - frequency(*a, m)).abs() < 1e-8);
        }
        // Matches the closed form at the last sample.
        let z = traj.states.last().unwrap();
        let t = *traj.times.last().unwrap();
        for (p, &a) in [1i64, 3].iter().enumerate() {
            let want = C64::from_polar(cfg.actions[p].sqrt(), cfg.theta0[p] + t * frequency(a, m));
            assert!((z.xi[z.slot(a)] - want).norm() < 1e-10 * t);
        }
    }

    #[test]
    fn reversibility_and_conservation() {
        let fs = FrequencySystem::new(mass(1.3), AdmissibleSet::new(&[1]).unwrap());
        let mut gal = Galerkin::new(8, fs.mass());
        let start = random_point(8, 3, true).scaled(0.3);
        for kind in [IntegratorKind::StrangSplit, IntegratorKind::ImplicitMidpoint] {
            let mut z = start.clone();
            let h0 = gal.hamiltonian(&z);
            gal.evolve(&mut z, 0.01, 500, kind).unwrap();
            assert!(z.reality_defect() < 1e-12);
            assert!((gal.hamiltonian(&z) - h0).abs() < 1e-5 * h0.abs());
            gal.evolve(&mut z, -0.01, 500, kind).unwrap();
            let back = z.xi.iter().zip(&start.xi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(back < 1e-11, "{kind:?} {back}");
        }
    }

    #[test]
    fn second_order_convergence() {
        let fs = FrequencySystem::new(mass(1.3), AdmissibleSet::new(&[1]).unwrap());
        let start = random_point(6, 11, true);
        let run = |dt: f64| {
            let mut gal = Galerkin::new(6, fs.mass());
            let mut z = start.clone();
            gal.evolve(&mut z, dt, (2.0 / dt).round() as usize, IntegratorKind::StrangSplit).unwrap();
            z
        };
        let reference = run(1e-4);
        let err = |z: PhasePoint| z.xi.iter().zip(&reference.xi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let (e1, e2) = (err(run(0.02)), err(run(0.01)));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn config_gates() {
        let ok = SimConfig::new(32, 1.3, vec![1], vec![1e-3], 5e-4, 1.0);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.dt = 0.1;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.actions = vec![0.0];
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.modes = vec![1, -1];
        bad.actions = vec![1e-3, 1e-3];
        bad.theta0 = vec![0.0, 0.0];
        assert!(matches!(bad.validate(), Err(Error::NotAdmissible { .. })));
    }

    #[test]
    fn blow_up_detected() {
        // An enormous action makes the explicit kick unstable at this step.
        let mut cfg = SimConfig::new(4, 1.0, vec![1], vec![1e6], 0.1, 50.0);
        cfg.samples = 10;
        let (traj, err) = integrate_partial(&cfg).unwrap();
        assert!(matches!(err, Some(Error::BlowUp { .. })), "{err:?}");
        assert!(!traj.states.is_empty());
    }

    #[test]
    fn distance_properties() {
        let set = AdmissibleSet::new(&[0, 2]).unwrap();
        let act = [0.01, 0.02];
        let m = mass(1.5);
        let on = torus_point(5, &set, &act, &[0.4, -2.0]);
        assert!(torus_profile_distance(&on, &set, &act, m, 1.0) < 1e-15);
        let mut off = on.clone();
        let i = off.slot(4);
        off.xi[i] = C64::new(1e-3, 0.0);
        off.eta[i] = C64::new(1e-3, 0.0);
        let d: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&al| torus_profile_distance(&off, &set, &act, m, al)).collect();
        assert!(d[0] > 0.0 && d[0] <= d[1] && d[1] <= d[2]);
    }

    #[test]
    fn power_law_and_io() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        let (p, c) = fit_power_law(&xs, &ys).unwrap();
        assert!((p - 1.7).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);

        let mut cfg = SimConfig::new(4, 1.3, vec![1], vec![1e-3], 0.05, 2.0);
        cfg.samples = 4;
        let traj = integrate(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,energy,action_1,phase_1\n"));
        assert_eq!(text.lines().count(), traj.times.len() + 1);

        let dir = tempfile::tempdir().unwrap();
        let meta = SnapshotMeta { cutoff: 4, dt: 0.05, mass: 1.3, run_id: "r".into(), time: 2.0, points: 0 };
        let z = traj.states.last().unwrap();
        let meta = write_snapshot(dir.path(), "snap", z, meta).unwrap();
        let (back, values) = read_snapshot(dir.path(), "snap").unwrap();
        assert_eq!(back, meta);
        assert_eq!(values.len(), grid_size(4));
    }
}
