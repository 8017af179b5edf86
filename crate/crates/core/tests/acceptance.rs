//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process fails when a criterion fails unless that criterion is listed in
//! `KNOWN_DEFECTS`, whose entries cannot pass as stated.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kamwave::birkhoff::{
    modulation_matrix, rescale, solve_homological, verify_zminus_vanishing, z4_action_table, NormalFormConfig,
};
use kamwave::kamcheck::melnikov_scan;
use kamwave::polyham::{
    bracket_with_h2, build_h2, build_p4, gradient, hessian, hessian_norm, poisson_bracket, random_polynomial,
    NormParams, PhasePoint, PolyHamiltonian,
};
use kamwave::simulate::{compare_frequencies, fit_power_law, integrate, SimConfig};
use kamwave::smalldiv::{scan, ScanConfig};
use kamwave::spectrum::{frequency, vandermonde_determinant, vandermonde_product, vandermonde_scale, AdmissibleSet, FrequencySystem, Mass};
use num_complex::Complex64 as C64;

/// Criteria whose statement contradicts the underlying mathematics; see the
/// detail printed on their line.
const KNOWN_DEFECTS: &[u32] = &[2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fs_of(modes: &[i64], mass: f64) -> FrequencySystem {
    FrequencySystem::new(Mass::new(mass).unwrap(), AdmissibleSet::new(modes).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn homological_identity() -> Outcome {
    let fs = fs_of(&[0, 1, 5], 1.2337);
    let nf = solve_homological(&build_p4(12, &fs), &fs, &NormalFormConfig::default()).unwrap();
    outcome(nf.residual_norm <= 1e-10, format!("relative residual {:.2e}", nf.residual_norm))
}

fn resonant_part_vanishing() -> Outcome {
    let sets: [&[i64]; 5] = [&[0, 1, 5], &[1], &[0, 2], &[-1, 3], &[1, 2, 4]];
    let mut clean = 0;
    for modes in sets {
        let fs = fs_of(modes, 1.2337);
        let nf = solve_homological(&build_p4(12, &fs), &fs, &NormalFormConfig::default()).unwrap();
        if verify_zminus_vanishing(&nf, fs.set()).all_empty() {
            clean += 1;
        }
    }
    let mirror = AdmissibleSet::new_unchecked(&[1, -1]).unwrap();
    let fs = FrequencySystem::new(Mass::new(1.2337).unwrap(), mirror.clone());
    let mirror_nonempty = match solve_homological(&build_p4(12, &fs), &fs, &NormalFormConfig::default()) {
        Ok(nf) => !verify_zminus_vanishing(&nf, &mirror).all_empty(),
        Err(_) => false,
    };
    outcome(
        clean == sets.len() && mirror_nonempty,
        format!(
            "{clean}/5 admissible sets empty; {{1,-1}} non-empty: {mirror_nonempty} \
             (its only candidate I_1 I_-1 is integrable, so the class is empty)"
        ),
    )
}

fn action_coefficients() -> Outcome {
    let mut worst: f64 = 0.0;
    for (modes, mass) in [(&[0i64, 1, 5][..], 1.2337), (&[-2, 3][..], 1.0), (&[1][..], 2.0)] {
        let fs = fs_of(modes, mass);
        let nf = solve_homological(&build_p4(8, &fs), &fs, &NormalFormConfig::default()).unwrap();
        let table = z4_action_table(&nf);
        let pairs = modes.len() * (modes.len() + 1) / 2;
        if table.len() != pairs {
            return outcome(false, format!("{} pairs found, expected {pairs}", table.len()));
        }
        for (l, k, c) in table {
            let delta = if l == k { 1.0 } else { 0.0 };
            let lam = |s: i64| ((s * s) as f64 + mass).sqrt();
            let expected = 3.0 / (4.0 * PI) * (4.0 - 3.0 * delta) / (lam(l) * lam(k));
            worst = worst.max(rel(c, expected));
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn modulation_determinant() -> Outcome {
    let mut worst: f64 = 0.0;
    for modes in [&[1i64][..], &[0, 1], &[0, 1, 5], &[-3, 0, 1, 5]] {
        for mass in [1.0, 1.2337, 2.0] {
            let fs = fs_of(modes, mass);
            let n = modes.len() as i32;
            let inv_sq: f64 = modes.iter().map(|&s| 1.0 / ((s * s) as f64 + mass)).product();
            let expected = (1.5 / PI).powi(n) * inv_sq * (4 * n - 3) as f64 * (-3f64).powi(n - 1);
            worst = worst.max(rel(modulation_matrix(&fs).determinant(), expected));
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e} over n = 1..4"))
}

fn difference_bound() -> Outcome {
    let mut violations = 0usize;
    let mut checked = 0usize;
    for mass in [1.0, 1.5, 2.0] {
        let m = Mass::new(mass).unwrap();
        let lam: Vec<f64> = (0..=500).map(|s| frequency(s, m)).collect();
        for a in 2..=500usize {
            for b in 1..a {
                checked += 1;
                if (lam[a] - lam[b]).abs() < (1.0 + (a - b) as f64) / 8.0 {
                    violations += 1;
                }
            }
        }
    }
    // λ depends on |s| only, so each (|a|, |b|) pair covers all four signs.
    outcome(violations == 0, format!("{checked} magnitude pairs, {violations} violations"))
}

fn frequency_asymptotics() -> Outcome {
    let mut violations = 0;
    for i in 0..101 {
        let mass = 1.0 + i as f64 / 100.0;
        let m = Mass::new(mass).unwrap();
        for s in 1..=1000i64 {
            for s in [s, -s] {
                if (frequency(s, m) - s.abs() as f64).abs() > mass / (2.0 * s.abs() as f64) {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over 101 masses"))
}

fn subsets(pool: &[i64], max: usize) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for &x in pool {
        let grown: Vec<Vec<i64>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(x);
                t
            })
            .collect();
        out.extend(grown);
    }
    out.retain(|s| !s.is_empty());
    out
}

fn vandermonde_closed_form() -> Outcome {
    let pool: Vec<i64> = (-8..=8).collect();
    let all = subsets(&pool, 4);
    let mut worst: f64 = 0.0;
    for mass in [1.0, 1.5, 2.0] {
        let m = Mass::new(mass).unwrap();
        for s in &all {
            let direct = vandermonde_determinant(s, m).unwrap();
            let closed = vandermonde_product(s, m).unwrap();
            let has_mirror = s.iter().any(|&a| a != 0 && s.contains(&-a));
            let denom = if has_mirror { vandermonde_scale(s, m).unwrap() } else { closed.abs() };
            worst = worst.max((direct - closed).abs() / denom);
        }
    }
    outcome(worst <= 1e-10, format!("{} subsets x 3 masses, max relative error {worst:.2e}", all.len()))
}

fn scaled_error(err: &PolyHamiltonian, parts: &[&PolyHamiltonian]) -> f64 {
    let scale = parts.iter().map(|p| p.max_abs_coeff()).fold(0.0, f64::max);
    err.max_abs_coeff() / scale.max(f64::MIN_POSITIVE)
}

fn poisson_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut jacobi, mut reality, mut momentum_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..100 {
        let draw = |rng: &mut ChaCha8Rng| {
            let deg = if rng.random_bool(0.5) { 3 } else { 4 };
            random_polynomial(rng, 6, deg, 6, true, true)
        };
        let (f, g, h) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let fg = poisson_bracket(&f, &g).unwrap();
        let a = poisson_bracket(&f, &poisson_bracket(&g, &h).unwrap()).unwrap();
        let b = poisson_bracket(&g, &poisson_bracket(&h, &f).unwrap()).unwrap();
        let c = poisson_bracket(&h, &fg).unwrap();
        let sum = a.add(&b).unwrap().add(&c).unwrap();
        jacobi = jacobi.max(scaled_error(&sum, &[&a, &b, &c]));
        reality = reality.max(fg.reality_defect() / fg.max_abs_coeff().max(f64::MIN_POSITIVE));
        momentum_ok &= fg.is_zero_momentum() && a.is_zero_momentum();
    }
    outcome(
        jacobi <= 1e-12 && reality <= 1e-12 && momentum_ok,
        format!("Jacobi {jacobi:.2e}, reality {reality:.2e}, momentum preserved {momentum_ok}"),
    )
}

fn quadratic_bracket_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mass = rng.random_range(1.0..=2.0);
        let fs = fs_of(&[0, 1, 5], mass);
        let f = random_polynomial(&mut rng, 6, 4, 12, true, true);
        let fast = bracket_with_h2(&f, &fs);
        let slow = poisson_bracket(&build_h2(6, &fs), &f).unwrap();
        worst = worst.max(fast.max_abs_diff(&slow) / slow.max_abs_coeff().max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-12, format!("max relative difference {worst:.2e}"))
}

const SHIFT_NUS: [f64; 3] = [1e-3, 2e-3, 4e-3];

fn shift_config(nu: f64, t_end: f64) -> SimConfig {
    SimConfig::new(32, 1.3, vec![1], vec![1.5 * nu], 5e-4, t_end)
}

fn frequency_shift() -> Outcome {
    let fs = fs_of(&[1], 1.3);
    let pre = scan(&fs, &ScanConfig::new(1e-6, 10, None)).unwrap();
    if !pre.violations.is_empty() {
        return outcome(false, format!("mass 1.3 is resonant: {} violations", pre.violations.len()));
    }
    let mut gaps = Vec::new();
    let mut within = true;
    let mut slowest = Duration::ZERO;
    for nu in SHIFT_NUS {
        let start = Instant::now();
        let cfg = shift_config(nu, 2000.0);
        let traj = integrate(&cfg).unwrap();
        let gap = compare_frequencies(&traj, &cfg.actions).unwrap().max_gap();
        slowest = slowest.max(start.elapsed());
        within &= gap <= 10.0 * nu.powf(1.5);
        gaps.push(gap);
    }
    let (exponent, _) = fit_power_law(&SHIFT_NUS, &gaps).unwrap();
    outcome(
        within && exponent >= 1.3 && slowest < Duration::from_secs(600),
        format!(
            "gaps {:.2e} {:.2e} {:.2e} vs 10 nu^1.5; fitted exponent {exponent:.3}; slowest run {:.1} s",
            gaps[0],
            gaps[1],
            gaps[2],
            slowest.as_secs_f64()
        ),
    )
}

fn conservation() -> Outcome {
    let (mut drift, mut defect) = (0.0f64, 0.0f64);
    for nu in SHIFT_NUS {
        let traj = integrate(&shift_config(nu, 1000.0)).unwrap();
        drift = drift.max(traj.energy_drift());
        defect = defect.max(traj.max_reality_defect());
    }
    outcome(
        drift <= 1e-6 && defect <= 1e-9,
        format!("energy drift {drift:.2e}, reality defect {defect:.2e}"),
    )
}

fn melnikov_sanity() -> Outcome {
    let fs = fs_of(&[1], 1.3);
    let nf = solve_homological(&build_p4(8, &fs), &fs, &NormalFormConfig::default()).unwrap();
    let rnf = rescale(&nf, &fs, 1e-3, &[1.5]).unwrap();
    let frac = |kappa: f64, kmax: i64| {
        melnikov_scan(&rnf, kappa, kmax, 40, 100, 0.1).unwrap().accepted_fraction.unwrap()
    };
    let base = frac(1e-6, 10);
    let looser = frac(1e-5, 10);
    let longer = frac(1e-6, 20);
    outcome(
        base >= 0.99 && looser <= base && longer <= base,
        format!("accepted {base:.3}; kappa x10 {looser:.3}; N x2 {longer:.3}"),
    )
}

fn radial_scaling() -> Outcome {
    let fs = fs_of(&[0, 1, 5], 1.2337);
    let cutoff = 6;
    let p4 = build_p4(cutoff, &fs);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let base: Vec<C64> = (-cutoff..=cutoff)
        .map(|s| {
            let amp = 1.0 / (1.0 + (s * s) as f64);
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amp
        })
        .collect();
    let radii: Vec<f64> = (0..8).map(|i| 1e-3 * 4f64.powi(i)).collect();
    let norm = NormParams::new(1.0, 0.5).unwrap();
    let (mut grad, mut hess) = (Vec::new(), Vec::new());
    for &r in &radii {
        let z = PhasePoint::real(cutoff, base.iter().map(|c| c * r).collect());
        grad.push(gradient(&p4, &z).weighted_norm(norm));
        hess.push(hessian_norm(&hessian(&p4, &z), 0.5));
    }
    let (pg, _) = fit_power_law(&radii, &grad).unwrap();
    let (ph, _) = fit_power_law(&radii, &hess).unwrap();
    outcome(
        (pg - 3.0).abs() <= 0.05 && (ph - 2.0).abs() <= 0.05,
        format!("gradient exponent {pg:.4}, Hessian exponent {ph:.4}"),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Option<u64>); 13] = [
        (1, "homological identity", homological_identity, Some(30)),
        (2, "resonant part vanishing", resonant_part_vanishing, Some(60)),
        (3, "action coefficients of Z4", action_coefficients, None),
        (4, "modulation determinant", modulation_determinant, None),
        (5, "difference divisor at k = 0", difference_bound, Some(10)),
        (6, "frequency asymptotics", frequency_asymptotics, None),
        (7, "derivative determinant closed form", vandermonde_closed_form, None),
        (8, "Poisson algebra", poisson_algebra, None),
        (9, "quadratic bracket rule", quadratic_bracket_rule, None),
        (10, "frequency-shift law", frequency_shift, None),
        (11, "energy and reality conservation", conservation, None),
        (12, "Melnikov scan sanity", melnikov_sanity, Some(120)),
        (13, "radial scaling of norms", radial_scaling, None),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let mut result = check();
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = limit {
            if secs >= limit as f64 {
                result.pass = false;
                result.detail += &format!("; exceeded {limit} s");
            }
        }
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        let note = if !result.pass && KNOWN_DEFECTS.contains(&id) { " [known defect]" } else { "" };
        println!("criterion {id:>2} {verdict} {name}: {} ({secs:.2} s){note}", result.detail);
        if !result.pass && !KNOWN_DEFECTS.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
