//! Subcommands, exit codes, manifests and reproducibility of the binary's
//! entry point.

use std::fs;
use std::path::Path;

use kamwave::cli::{run, EXIT_BLOW_UP, EXIT_GAMMA_GATE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATIONS};
use serde_json::Value;
use tempfile::TempDir;

fn kw(args: &[&str]) -> i32 {
    run(std::iter::once("kamwave").chain(args.iter().copied()))
}

fn out_dir(tmp: &TempDir, name: &str) -> String {
    tmp.path().join(name).to_string_lossy().into_owned()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn admissible_verdicts_and_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let ok = out_dir(&tmp, "ok");
    assert_eq!(kw(&["admissible", "--modes", "0,1,5", "--out", &ok]), EXIT_OK);
    let manifest = json(Path::new(&ok).join("manifest.json"));
    assert_eq!(manifest["command"], "admissible");
    assert_eq!(manifest["params"]["modes"], serde_json::json!([0, 1, 5]));
    assert!(Path::new(&ok).join("verdict.json").exists());

    let bad = out_dir(&tmp, "bad");
    assert_eq!(kw(&["admissible", "--modes", "1,-1", "--out", &bad]), EXIT_VIOLATIONS);
    assert_eq!(kw(&["admissible", "--modes", "2,2", "--out", &bad]), EXIT_USAGE);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(kw(&["no-such-command"]), EXIT_USAGE);
    assert_eq!(kw(&["divisors", "--mass", "3.5", "--out", &out_dir(&tmp, "m")]), EXIT_USAGE);
    assert_eq!(kw(&["simulate", "--dt", "0.1", "--out", &out_dir(&tmp, "s")]), EXIT_USAGE);
    assert_eq!(kw(&["kamcheck", "--modes", "0,1,2,3,4", "--out", &out_dir(&tmp, "k")]), EXIT_USAGE);
}

#[test]
fn divisor_violations_exit_three_and_are_listed() {
    let tmp = TempDir::new().unwrap();
    let clean = out_dir(&tmp, "clean");
    assert_eq!(kw(&["divisors", "--out", &clean]), EXIT_OK);
    let loose = out_dir(&tmp, "loose");
    assert_eq!(kw(&["divisors", "--kappa", "10", "--kmax", "2", "--smax", "10", "--out", &loose]), EXIT_VIOLATIONS);
    let table = fs::read_to_string(Path::new(&loose).join("divisors.csv")).unwrap();
    assert!(table.lines().count() > 1);
}

#[test]
fn gamma_gate_exits_four() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "b");
    assert_eq!(kw(&["birkhoff", "--cutoff", "6", "--out", &out]), EXIT_OK);
    assert!(Path::new(&out).join("normal_form.txt").exists());
    assert_eq!(kw(&["birkhoff", "--cutoff", "6", "--gamma-gate", "0.5", "--out", &out]), EXIT_GAMMA_GATE);
}

#[test]
fn blow_up_exits_five_and_keeps_last_snapshot() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "blow");
    let code = kw(&[
        "simulate", "--rho", "1000000", "--cutoff", "4", "--dt", "0.1", "--t-end", "50", "--out", &out,
    ]);
    assert_eq!(code, EXIT_BLOW_UP);
    assert!(Path::new(&out).join("final.bin").exists());
    assert!(json(Path::new(&out).join("summary.json"))["error"].is_string());
}

#[test]
fn kamcheck_reports_each_hypothesis() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "k");
    let code = kw(&["kamcheck", "--nu", "1e-4", "--kmax", "10", "--smax", "40", "--out", &out]);
    assert_eq!(code, EXIT_OK);
    let report = json(Path::new(&out).join("kamcheck.json"));
    let text = report.to_string();
    for h in ["A1", "A2", "A3"] {
        assert!(text.contains(h), "{h} missing from report");
    }
    // At ν = 1e-3 the boundary shell |k|₁ = N leaves D2 tuples uncertified.
    let out = out_dir(&tmp, "k3");
    assert_eq!(kw(&["kamcheck", "--out", &out]), EXIT_VIOLATIONS);
    let records = fs::read_to_string(Path::new(&out).join("violations.txt")).unwrap();
    assert!(records.lines().all(|l| l.starts_with("hyp=A2 k=") && l.ends_with("kind=D2")));
}

#[test]
fn manifest_replays_to_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let first = out_dir(&tmp, "first");
    let args = [
        "simulate", "--cutoff", "8", "--t-end", "20", "--dt", "1e-3", "--noise", "0.1", "--seed", "7", "--out", &first,
    ];
    assert_eq!(kw(&args), EXIT_OK);
    let second = out_dir(&tmp, "second");
    let manifest = Path::new(&first).join("manifest.json").to_string_lossy().into_owned();
    assert_eq!(kw(&["simulate", "--config", &manifest, "--out", &second]), EXIT_OK);
    for file in ["trajectory.csv", "final.bin", "summary.json"] {
        let a = fs::read(Path::new(&first).join(file)).unwrap();
        let b = fs::read(Path::new(&second).join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    assert_eq!(
        json(Path::new(&first).join("manifest.json"))["params"],
        json(Path::new(&second).join("manifest.json"))["params"]
    );
}

#[test]
fn divisor_scans_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (out_dir(&tmp, "a"), out_dir(&tmp, "b"));
    for out in [&a, &b] {
        let code = kw(&["divisors", "--modes", "1,3", "--kappa", "0.05", "--kmax", "3", "--smax", "20", "--out", out]);
        assert_eq!(code, EXIT_VIOLATIONS);
    }
    assert_eq!(
        fs::read(Path::new(&a).join("divisors.csv")).unwrap(),
        fs::read(Path::new(&b).join("divisors.csv")).unwrap()
    );
}
