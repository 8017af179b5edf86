//! The `kamwave` command line.
//!
//! Each subcommand resolves its parameters in three layers: built-in
//! defaults, then an optional JSON `--config` (either a bare parameter
//! object or a previously written manifest, whose `params` field is used),
//! then explicit flags. The resolved parameters are echoed into
//! `<out>/manifest.json`, so a run can be repeated with
//! `--config <out>/manifest.json`.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 bound violations
//! (including a non-admissible mode set), 4 near-resonance gate, 5 blow-up.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::birkhoff::{
    solve_homological, to_text, verify_zminus_vanishing, z4_action_formula, z4_action_table, NormalFormConfig,
};
use crate::error::Error;
use crate::kamcheck::{
    check_a1, check_dimension, check_transversality, default_rho_grid, kappa_sweep, melnikov_scan, HypothesisReport,
    TransversalityConfig,
};
use crate::polyham::build_p4;
use crate::simulate::{
    compare_frequencies, integrate_partial, write_snapshot, write_trajectory_csv, IntegratorKind, Noise, SimConfig,
    SnapshotMeta,
};
use crate::smalldiv::{excluded_mass_scan, scan, ScanConfig};
use crate::spectrum::{admissibility_witness, AdmissibleSet, FrequencySystem, Mass};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VIOLATIONS: i32 = 3;
pub const EXIT_GAMMA_GATE: i32 = 4;
pub const EXIT_BLOW_UP: i32 = 5;

/// Thread count for the parallel sweeps; nothing else is read from the
/// environment.
pub const THREADS_ENV: &str = "KAMWAVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kamwave", version, about = "Normal forms, small divisors and torus simulations for the cubic wave equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a mode set contains no pair {j, -j}.
    Admissible(AdmissibleArgs),
    /// Scan small divisors for violations of the lower bounds.
    Divisors(DivisorArgs),
    /// Order-four normal form and its resonant part.
    Birkhoff(BirkhoffArgs),
    /// Separation, transversality and second Melnikov checks.
    Kamcheck(KamcheckArgs),
    /// Galerkin simulation starting on a linear torus.
    Simulate(SimulateArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON parameter file or a previous manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "kamwave-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdmissibleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated modes, e.g. `0,1,5`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmissibleParams {
    pub modes: Vec<i64>,
}

impl Default for AdmissibleParams {
    fn default() -> Self {
        AdmissibleParams { modes: vec![0, 1, 5] }
    }
}

#[derive(Debug, Args)]
pub struct DivisorArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Option<Vec<i64>>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// `|k|₁` cutoff.
    #[arg(long)]
    pub kmax: Option<i64>,
    /// Mode cutoff; defaults to 2(max|a| + 2)·kmax.
    #[arg(long)]
    pub smax: Option<i64>,
    /// Mass-grid points for the excluded-measure estimate (0 skips it).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Re-check each violation with interval arithmetic.
    #[arg(long)]
    pub certify: bool,
    /// Restrict `D3` pairs to the a-priori mode cap.
    #[arg(long)]
    pub d3_cap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DivisorParams {
    pub modes: Vec<i64>,
    pub mass: f64,
    pub kappa: f64,
    pub kmax: i64,
    pub smax: Option<i64>,
    pub grid: usize,
    pub certify: bool,
    pub d3_cap: bool,
}

impl Default for DivisorParams {
    fn default() -> Self {
        DivisorParams {
            modes: vec![1],
            mass: 1.3,
            kappa: 1e-6,
            kmax: 10,
            smax: None,
            grid: 0,
            certify: false,
            d3_cap: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct BirkhoffArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Option<Vec<i64>>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<i64>,
    /// Smallest allowed divisor among removed monomials.
    #[arg(long)]
    pub gamma_gate: Option<f64>,
    /// Also assemble the degree-six remainder.
    #[arg(long)]
    pub with_remainder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirkhoffParams {
    pub modes: Vec<i64>,
    pub mass: f64,
    pub cutoff: i64,
    pub gamma_gate: f64,
    pub with_remainder: bool,
}

impl Default for BirkhoffParams {
    fn default() -> Self {
        BirkhoffParams { modes: vec![0, 1, 5], mass: 1.234, cutoff: 12, gamma_gate: 1e-8, with_remainder: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisChoice {
    A1,
    A2,
    A3,
    All,
}

#[derive(Debug, Args)]
pub struct KamcheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Option<Vec<i64>>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Reference point in [1,2]ⁿ (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Second Melnikov threshold.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub kmax: Option<i64>,
    #[arg(long)]
    pub smax: Option<i64>,
    /// ρ-grid points per dimension.
    #[arg(long)]
    pub rho_grid: Option<usize>,
    /// Small-k range is |k|₁ ≤ ν^(−gamma).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub breve_c: Option<f64>,
    /// Smallest accepted fraction for A3 to count as passing.
    #[arg(long)]
    pub min_accepted: Option<f64>,
    #[arg(long, value_enum)]
    pub hypothesis: Option<HypothesisChoice>,
    /// κ values for an accepted-fraction sweep (written to kappa_sweep.csv).
    #[arg(long, value_delimiter = ',')]
    pub kappa_sweep: Option<Vec<f64>>,
    /// Allow ρ-grids in dimension above 4.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KamcheckParams {
    pub modes: Vec<i64>,
    pub mass: f64,
    pub nu: f64,
    pub rho: Option<Vec<f64>>,
    pub kappa: f64,
    pub kmax: i64,
    pub smax: i64,
    pub rho_grid: Option<usize>,
    pub gamma: f64,
    pub breve_c: f64,
    pub min_accepted: f64,
    pub hypothesis: HypothesisChoice,
    pub kappa_sweep: Vec<f64>,
    pub force: bool,
}

impl Default for KamcheckParams {
    fn default() -> Self {
        KamcheckParams {
            modes: vec![1],
            mass: 1.3,
            nu: 1e-3,
            rho: None,
            kappa: 1e-6,
            kmax: 10,
            smax: 40,
            rho_grid: None,
            gamma: 0.1,
            breve_c: 0.05,
            min_accepted: 0.99,
            hypothesis: HypothesisChoice::All,
            kappa_sweep: Vec::new(),
            force: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub modes: Option<Vec<i64>>,
    #[arg(long)]
    pub mass: Option<f64>,
    /// Galerkin mode bound.
    #[arg(long)]
    pub cutoff: Option<i64>,
    /// Action scale; the actions are ν·ρ.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Switch the cubic term off.
    #[arg(long)]
    pub linear: bool,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorChoice>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Noise amplitude on normal modes, in units of ν.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sobolev index of the torus distance.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorChoice {
    StrangSplit,
    ImplicitMidpoint,
}

impl From<IntegratorChoice> for IntegratorKind {
    fn from(c: IntegratorChoice) -> Self {
        match c {
            IntegratorChoice::StrangSplit => IntegratorKind::StrangSplit,
            IntegratorChoice::ImplicitMidpoint => IntegratorKind::ImplicitMidpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateParams {
    pub modes: Vec<i64>,
    pub mass: f64,
    pub cutoff: i64,
    pub nu: f64,
    pub rho: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    pub dt: f64,
    pub t_end: f64,
    pub linear: bool,
    pub integrator: IntegratorChoice,
    pub samples: usize,
    pub noise: Option<f64>,
    pub seed: u64,
    pub alpha: f64,
    pub run_id: String,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            modes: vec![1],
            mass: 1.3,
            cutoff: 32,
            nu: 1e-3,
            rho: None,
            theta0: None,
            dt: 5e-4,
            t_end: 2000.0,
            linear: false,
            integrator: IntegratorChoice::StrangSplit,
            samples: 4000,
            noise: None,
            seed: 0,
            alpha: 1.0,
            run_id: "run".into(),
        }
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<Error>() {
            Some(Error::GammaGate { .. }) => EXIT_GAMMA_GATE,
            Some(Error::BlowUp { .. }) => EXIT_BLOW_UP,
            Some(Error::NotAdmissible { .. }) => EXIT_VIOLATIONS,
            Some(_) => EXIT_USAGE,
            None => 1,
        };
        Exit { code, error }
    }
}

fn usage(msg: impl Into<String>) -> Exit {
    Exit { code: EXIT_USAGE, error: anyhow::anyhow!(msg.into()) }
}

fn load<P: DeserializeOwned + Default>(config: &Option<PathBuf>) -> Result<P, Exit> {
    let Some(path) = config else { return Ok(P::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(|e| Exit {
        code: EXIT_USAGE,
        error: e,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let params = match value.get("params") {
        Some(p) => p.clone(),
        None => value,
    };
    serde_json::from_value(params).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes `manifest.json` with the command, crate version and resolved
/// parameters, and returns the output directory.
fn manifest<P: Serialize>(out: &Path, command: &str, params: &P, outputs: &[&str]) -> Result<(), Exit> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "params": params,
        "outputs": outputs,
    });
    write_json(&out.join("manifest.json"), &doc)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Exit> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn println_json<T: Serialize>(value: &T) -> Result<(), Exit> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn frequency_system(modes: &[i64], mass: f64) -> Result<FrequencySystem, Exit> {
    Ok(FrequencySystem::new(Mass::new(mass)?, AdmissibleSet::new(modes)?))
}

macro_rules! override_fields {
    ($params:expr, $args:expr, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $params.$field = v; })*
    };
}

fn cmd_admissible(args: AdmissibleArgs) -> Result<i32, Exit> {
    let mut p: AdmissibleParams = load(&args.common.config)?;
    override_fields!(p, args, modes);
    manifest(&args.common.out, "admissible", &p, &["verdict.json"])?;
    let verdict = match admissibility_witness(&p.modes)? {
        None => json!({"modes": p.modes, "admissible": true}),
        Some(w) => json!({"modes": p.modes, "admissible": false, "witness": w}),
    };
    write_json(&args.common.out.join("verdict.json"), &verdict)?;
    println_json(&verdict)?;
    Ok(if verdict["admissible"] == json!(true) { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn cmd_divisors(args: DivisorArgs) -> Result<i32, Exit> {
    let mut p: DivisorParams = load(&args.common.config)?;
    override_fields!(p, args, modes, mass, kappa, kmax, grid);
    if args.smax.is_some() {
        p.smax = args.smax;
    }
    p.certify |= args.certify;
    p.d3_cap |= args.d3_cap;
    if !(p.kappa > 0.0) || p.kmax < 1 || p.smax.is_some_and(|s| s < 0) {
        return Err(usage("need kappa > 0, kmax >= 1 and smax >= 0"));
    }
    let fs = frequency_system(&p.modes, p.mass)?;
    let out = &args.common.out;
    manifest(out, "divisors", &p, &["divisors.csv", "summary.json"])?;
    let mut cfg = ScanConfig::new(p.kappa, p.kmax, p.smax);
    cfg.certify = p.certify;
    cfg.apply_d3_cap = p.d3_cap;
    let outcome = scan(&fs, &cfg)?;
    let mut w = csv::Writer::from_path(out.join("divisors.csv"))?;
    let mut header = vec!["kind", "k", "a", "b", "value", "bound_required", "satisfied"];
    if p.certify {
        header.push("certified");
    }
    w.write_record(&header)?;
    let opt = |s: Option<i64>| s.map_or(String::new(), |v| v.to_string());
    for r in &outcome.violations {
        let k = r.query.k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut row = vec![
            r.query.kind.to_string(),
            k,
            opt(r.query.a),
            opt(r.query.b),
            format!("{:e}", r.value),
            format!("{:e}", r.bound_required),
            r.satisfied.to_string(),
        ];
        if p.certify {
            row.push(r.certified.map_or(String::new(), |c| c.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let measure = if p.grid > 0 { Some(excluded_mass_scan(fs.set(), &cfg, p.grid)?) } else { None };
    let summary = json!({
        "checked": outcome.checked,
        "resonant_skipped": outcome.resonant_skipped,
        "violations": outcome.violations.len(),
        "metadata": outcome.metadata,
        "excluded_mass": measure,
    });
    write_json(&out.join("summary.json"), &summary)?;
    println_json(&summary)?;
    Ok(if outcome.violations.is_empty() { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn cmd_birkhoff(args: BirkhoffArgs) -> Result<i32, Exit> {
    let mut p: BirkhoffParams = load(&args.common.config)?;
    override_fields!(p, args, modes, mass, cutoff, gamma_gate);
    p.with_remainder |= args.with_remainder;
    let fs = frequency_system(&p.modes, p.mass)?;
    if p.cutoff < fs.set().n_bound() {
        return Err(usage("cutoff must cover every tangential mode"));
    }
    let out = &args.common.out;
    manifest(out, "birkhoff", &p, &["normal_form.txt", "report.json"])?;
    let cfg = NormalFormConfig { gamma_gate: p.gamma_gate, with_remainder: p.with_remainder };
    let nf = solve_homological(&build_p4(p.cutoff, &fs), &fs, &cfg)?;
    fs::write(out.join("normal_form.txt"), to_text(&nf))?;
    let zminus = verify_zminus_vanishing(&nf, fs.set());
    let table: Vec<Value> = z4_action_table(&nf)
        .into_iter()
        .map(|(l, k, c)| json!({"l": l, "k": k, "coefficient": c, "formula": z4_action_formula(&fs, l, k)}))
        .collect();
    let report = json!({
        "residual_norm": nf.residual_norm,
        "gamma_min": nf.gamma_min,
        "gamma_quad": nf.gamma_quad,
        "terms": {"chi4": nf.chi4.len(), "z4": nf.z4.len(), "q4": nf.q4.len()},
        "zminus_vanishing": zminus.all_empty(),
        "zminus": zminus,
        "z4_action_table": table,
    });
    write_json(&out.join("report.json"), &report)?;
    println_json(&json!({
        "residual_norm": nf.residual_norm,
        "gamma_min": nf.gamma_min,
        "zminus_vanishing": report["zminus_vanishing"],
        "z4_action_table": report["z4_action_table"],
    }))?;
    Ok(if zminus.all_empty() { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn cmd_kamcheck(args: KamcheckArgs) -> Result<i32, Exit> {
    let mut p: KamcheckParams = load(&args.common.config)?;
    override_fields!(p, args, modes, mass, nu, kappa, kmax, smax, gamma, breve_c, min_accepted, hypothesis, kappa_sweep);
    if args.rho.is_some() {
        p.rho = args.rho.clone();
    }
    if args.rho_grid.is_some() {
        p.rho_grid = args.rho_grid;
    }
    p.force |= args.force;
    let fs = frequency_system(&p.modes, p.mass)?;
    let n = fs.set().n();
    check_dimension(n, p.force)?;
    if !(p.nu > 0.0) || !(p.kappa >= 0.0) || p.kmax < 1 || p.smax < 0 || !(p.gamma > 0.0) {
        return Err(usage("need nu > 0, kappa >= 0, kmax >= 1, smax >= 0, gamma > 0"));
    }
    let rho = p.rho.clone().unwrap_or_else(|| vec![1.5; n]);
    if rho.len() != n || rho.iter().any(|r| !(1.0..=2.0).contains(r)) {
        return Err(usage("rho needs one entry in [1,2] per mode"));
    }
    let grid = p.rho_grid.unwrap_or_else(|| default_rho_grid(n));
    if grid == 0 {
        return Err(usage("rho_grid must be positive"));
    }
    let out = &args.common.out;
    manifest(out, "kamcheck", &p, &["kamcheck.json", "violations.txt", "kappa_sweep.csv"])?;
    let nf_cutoff = fs.set().n_bound().max(1);
    let nf = solve_homological(&build_p4(nf_cutoff, &fs), &fs, &NormalFormConfig::default())?;
    let rnf = crate::birkhoff::rescale(&nf, &fs, p.nu, &rho)?;
    let want = |h: HypothesisChoice| p.hypothesis == HypothesisChoice::All || p.hypothesis == h;
    let mut reports: Vec<HypothesisReport> = Vec::new();
    if want(HypothesisChoice::A1) {
        reports.push(check_a1(&rnf, p.smax, grid));
    }
    if want(HypothesisChoice::A2) {
        let mut cfg = TransversalityConfig::new(p.kmax, p.smax, p.gamma);
        cfg.breve_c = p.breve_c;
        reports.push(check_transversality(&rnf, &cfg)?);
    }
    if want(HypothesisChoice::A3) {
        reports.push(melnikov_scan(&rnf, p.kappa, p.kmax, p.smax, grid, p.gamma)?);
    }
    let mut records = String::new();
    for r in &reports {
        records.push_str(&r.violation_records());
    }
    fs::write(out.join("violations.txt"), records)?;
    if !p.kappa_sweep.is_empty() {
        let mut w = csv::Writer::from_path(out.join("kappa_sweep.csv"))?;
        w.write_record(["kappa", "accepted_fraction"])?;
        for (k, f) in kappa_sweep(&rnf, &p.kappa_sweep, p.kmax, p.smax, grid) {
            w.write_record([format!("{k:e}"), format!("{f}")])?;
        }
        w.flush()?;
    }
    let passed = |r: &HypothesisReport| match r.accepted_fraction {
        Some(f) => f >= p.min_accepted,
        None => r.verified,
    };
    let all_pass = reports.iter().all(passed);
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "hypothesis": r.hypothesis,
                "verified": r.verified,
                "passed": passed(r),
                "checked_count": r.checked_count,
                "violations": r.violations.len(),
                "accepted_fraction": r.accepted_fraction,
                "branches": r.branches,
                "parameters": r.parameters,
            })
        })
        .collect();
    write_json(&out.join("kamcheck.json"), &json!({"reports": reports, "all_passed": all_pass}))?;
    println_json(&json!({"reports": summary, "all_passed": all_pass}))?;
    Ok(if all_pass { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, Exit> {
    let mut p: SimulateParams = load(&args.common.config)?;
    override_fields!(p, args, modes, mass, cutoff, nu, dt, t_end, samples, seed, alpha, run_id);
    if args.rho.is_some() {
        p.rho = args.rho.clone();
    }
    if args.theta0.is_some() {
        p.theta0 = args.theta0.clone();
    }
    if args.noise.is_some() {
        p.noise = args.noise;
    }
    if let Some(i) = args.integrator {
        p.integrator = i;
    }
    p.linear |= args.linear;
    if !(p.nu > 0.0) {
        return Err(usage("nu must be positive"));
    }
    let n = p.modes.len();
    let rho = p.rho.clone().unwrap_or_else(|| vec![1.5; n]);
    let mut cfg = SimConfig::new(p.cutoff, p.mass, p.modes.clone(), rho.iter().map(|r| p.nu * r).collect(), p.dt, p.t_end);
    cfg.theta0 = p.theta0.clone().unwrap_or_else(|| vec![0.0; n]);
    cfg.nonlinearity_on = !p.linear;
    cfg.integrator = p.integrator.into();
    cfg.samples = p.samples;
    cfg.alpha = p.alpha;
    cfg.noise = p.noise.map(|eps| Noise { amplitude: eps * p.nu, seed: p.seed });
    cfg.validate()?;
    let out = &args.common.out;
    manifest(out, "simulate", &p, &["trajectory.csv", "summary.json", "final.bin", "final.json"])?;
    let (traj, failure) = integrate_partial(&cfg)?;
    write_trajectory_csv(&traj, fs::File::create(out.join("trajectory.csv"))?)?;
    let last = traj.states.last().expect("initial state is always stored");
    let meta = SnapshotMeta {
        cutoff: cfg.cutoff,
        dt: cfg.dt,
        mass: cfg.mass,
        run_id: p.run_id.clone(),
        time: *traj.times.last().unwrap(),
        points: 0,
    };
    write_snapshot(out, "final", last, meta)?;
    if let Some(err) = failure {
        let summary = json!({"error": err.to_string(), "last_good_time": traj.times.last()});
        write_json(&out.join("summary.json"), &summary)?;
        return Err(err.into());
    }
    let comparison = compare_frequencies(&traj, &cfg.actions).ok();
    let bound = 10.0 * p.nu.powf(1.5);
    let summary = json!({
        "steps": traj.steps,
        "extracted_frequencies": traj.extracted_frequencies,
        "frequency_comparison": comparison,
        "gap_bound": bound,
        "within_bound": comparison.as_ref().map(|c| c.max_gap() <= bound),
        "torus_distance": traj.sup_distance,
        "energy_drift": traj.energy_drift(),
        "reality_defect": traj.max_reality_defect(),
        "momentum_drift": traj.momentum_drift(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println_json(&summary)?;
    Ok(EXIT_OK)
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second initialisation in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_threads();
    let result = match cli.command {
        Command::Admissible(a) => cmd_admissible(a),
        Command::Divisors(a) => cmd_divisors(a),
        Command::Birkhoff(a) => cmd_birkhoff(a),
        Command::Kamcheck(a) => cmd_kamcheck(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(code) => code,
        Err(Exit { code, error }) => {
            eprintln!("error: {error:#}");
            code
        }
    }
}
