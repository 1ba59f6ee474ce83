use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn hbm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbm")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|_| panic!("stdout is JSON: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn hitting_decay_slope_column_ends_near_minus_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", json!({
        "experiment": "hitting-decay", "master_seed": 1,
        "parameters": {"n": 3, "eta_grid": [10.0, 20.0, 40.0]}
    }));
    let o = hbm(&["run", &cfg, "--output-dir", "out"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("out/hitting_decay.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let slope: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!((slope + 2.0).abs() < 0.05, "{slope}");
}

#[test]
fn normalization_reports_unit_integral() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", json!({
        "experiment": "normalization", "master_seed": 1, "output_dir": "norm",
        "parameters": {"n": 3, "t": 1.0}
    }));
    let o = hbm(&["run", &cfg], tmp.path());
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("norm/normalization.json")).unwrap()).unwrap();
    assert!((v["integral"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let m = stdout_json(&o);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["config"]["experiment"], "normalization");
}

#[test]
fn repeated_runs_have_identical_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", json!({
        "experiment": "radial-mc", "master_seed": 99,
        "parameters": {"n": 3, "t": 1.0, "dt": 0.01, "paths": 3000}
    }));
    let a = stdout_json(&hbm(&["run", &cfg, "--output-dir", "a"], tmp.path()));
    let b = stdout_json(&hbm(&["run", &cfg, "--output-dir", "b", "--workers", "3"], tmp.path()));
    assert_eq!(a["outputs"], b["outputs"]);
    assert!(!a["outputs"].as_array().unwrap().is_empty());
}

#[test]
fn validate_lists_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", json!({
        "experiment": "kernel-scan", "master_seed": 1, "parameters": {"n": 1}
    }));
    let o = hbm(&["validate", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let v = stdout_json(&o);
    assert_eq!(v["violations"][0]["field"], "n");
    assert_eq!(v["violations"][0]["rule"], "Dimension requires n ≥ 2");

    let good = write_config(tmp.path(), "good.json", json!({"experiment": "mdp-rate", "master_seed": 1}));
    let o = hbm(&["validate", &good], tmp.path());
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["violations"], json!([]));
}

#[test]
fn invalid_config_stops_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", json!({
        "experiment": "mdp-rate", "master_seed": 1, "parameters": {"beta": 0.5}
    }));
    let o = hbm(&["run", &cfg, "--output-dir", "out"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "validation");
    assert_eq!(err["violations"][0]["rule"], "β must lie in (0, 1/2)");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn schema_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hbm(&["schema", "ldp-rate"], tmp.path());
    assert!(o.status.success());
    let v = stdout_json(&o);
    let cols: Vec<&str> = v["files"][0]["fields"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(cols, ["t", "tail_prob", "scaled_log", "target", "abs_err"]);
    let o = hbm(&["schema", "heat-scan"], tmp.path());
    assert!(!o.status.success());
}

#[test]
fn seed_cannot_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", json!({
        "experiment": "radial-mc", "master_seed": 5,
        "parameters": {"n": 2, "t": 0.5, "dt": 0.01, "paths": 500}
    }));
    let run = |env: Option<&str>, dir: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hbm"));
        c.args(["run", &cfg, "--output-dir", dir]).current_dir(tmp.path());
        if let Some(s) = env {
            c.env("HBM_SEED", s).env("MASTER_SEED", s);
        }
        stdout_json(&c.output().unwrap())["outputs"].clone()
    };
    assert_eq!(run(None, "a"), run(Some("12345"), "b"));
}
