use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FLAT: &str = r#"{"name": "flat", "model": "flat_torus", "n": 1, "lattice": {"resolution": 16}, "schedule": {"geometric": {"count": 6}}}"#;
const STUBBORN: &str = r#"{"name": "stubborn", "model": {"conformal_torus": {"f": [
    {"coeff": 0.3, "factors": [{"fn": "cos", "k": [1, 0]}, {"fn": "cos", "k": [0, 1]}]}]}},
    "lattice": {"resolution": 16}, "schedule": {"explicit": [0.5, 0.25, 0.125, 0.0625]},
    "solver": {"max_newton": 1}}"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kahler-lab")).args(args).env("KLAB_THREADS", "2").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&lab(&["frobnicate"])), 2);
    assert_eq!(code(&lab(&["sweep"])), 2);
    assert_eq!(code(&lab(&["--help"])), 0);

    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&lab(&["sweep", "--config", missing.to_str().unwrap()])), 2);

    let bad = write_config(tmp.path(), "bad.json", r#"{"model": "klein_bottle"}"#);
    let out = lab(&["verify", "--config", &bad]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("klein_bottle"));

    let flat = write_config(tmp.path(), "flat.json", FLAT);
    assert_eq!(code(&lab(&["solve", "--config", &flat, "--epsilon", "-1"])), 2);
    assert_eq!(code(&lab(&["sweep", "--config", &flat, "--tolerance", "0"])), 2);
    assert_eq!(code(&lab(&["report", tmp.path().to_str().unwrap()])), 2);
}

#[test]
fn sweep_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "flat.json", FLAT);
    let out_dir = tmp.path().join("run");
    let out = lab(&["sweep", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Collapsing"));
    for file in ["manifest.json", "sweep.csv", "classification.json", "kw_report.json", "curvature.json", "fields/u_e05.f64"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }

    let out = lab(&["report", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["entries"], 6);
    assert!(out_dir.join("plot.csv").exists());
}

#[test]
fn solve_and_curvature_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "flat.json", FLAT);
    let dir = tmp.path().join("solve");
    let out = lab(&["solve", "--config", &config, "--epsilon", "0.2", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let sol: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((sol["sup_u"].as_f64().unwrap() - 0.2f64.ln()).abs() < 1e-10);
    assert!(dir.join("fields/u.f64").exists());

    let dir = tmp.path().join("curv");
    let out = lab(&["curvature", "--config", &config, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["kappa_max"], 0.0);
}

#[test]
fn verify_passes_then_fails_after_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "flat.json", FLAT);
    let dir = tmp.path().join("run");
    let out = lab(&["verify", "--config", &config, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));

    let dump = dir.join("fields/u_e03.f64");
    let mut bytes = fs::read(&dump).unwrap();
    bytes[8 * 11 + 7] ^= 0x80;
    fs::write(&dump, bytes).unwrap();
    let out = lab(&["verify", "--config", &config, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("continuity.residual")), "{stdout}");
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "stubborn.json", STUBBORN);
    let out = lab(&["sweep", "--config", &config, "--out", tmp.path().join("run").to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
