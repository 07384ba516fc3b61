//! End-to-end runs of the `atinv` binary: exit codes, report shapes, and the
//! sample configurations shipped in `configs/`.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn atinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atinv")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const REPO_CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

#[test]
fn invariant_command_reports_certified_value() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let config = Path::new(REPO_CONFIGS).join("divisible_x_n2.json");
    let run = atinv(&[
        "invariant",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "stderr: {}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let value = report["result"]["value"].as_f64().unwrap();
    assert!((value - 0.033552).abs() < 1e-4, "value {value}");
    assert!(report["result"]["lower"].as_f64().unwrap() <= value);
    assert!(report["result"]["upper"].as_f64().unwrap() >= value);
    assert_eq!(report["precision_met"], serde_json::Value::Bool(true));
    // Every emitted number carries its bracket and flags.
    assert!(report["result"]["meta"]["flags"].is_array());
}

#[test]
fn invariant_exact_zero_case() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "odometer.json",
        r#"{
            "version": 1,
            "spec": {
                "variant": "rational",
                "gen": { "tail": [[0, {"num":1,"den":1}], [1, {"num":1,"den":1}]] },
                "scale": { "offset": 2 },
                "r": { "num": 1, "den": 1 }
            }
        }"#,
    );
    let run = atinv(&["invariant", "--config", &config]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["result"]["value"].as_f64().unwrap(), 0.0);
    let flags = report["result"]["meta"]["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f == "exact_zero"));
}

#[test]
fn invalid_configs_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    for bad in [
        r#"{"version": 9, "spec": null}"#,
        r#"{"version": 1, "workers": 0}"#,
        r#"not json"#,
        r#"{"version": 1, "sweep": {"r_grid": []}}"#,
    ] {
        let config = write(&dir, "bad.json", bad);
        let run = atinv(&["invariant", "--config", &config]);
        assert_eq!(run.status.code(), Some(2), "config: {bad}");
    }
    // Missing file.
    let run = atinv(&["invariant", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn wide_bracket_exits_with_code_three() {
    // An explicit witness list gives the level infimum no tail certificate,
    // so the bracket stays wide and the run reports unmet precision.
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "wide.json",
        r#"{
            "version": 1,
            "spec": {
                "variant": "rational",
                "gen": { "tail": [[0, {"num":1,"den":1}], [1, {"num":1,"den":1}]] },
                "scale": { "offset": 2 },
                "r": { "num": 1, "den": 2 }
            },
            "witness": { "rule": "explicit", "angles": [{ "num": 1, "den": 8 }] },
            "tolerances": { "exp_tol": 1e-12, "target_width": 1e-6 }
        }"#,
    );
    let out = dir.path().join("partial.json");
    let run = atinv(&["invariant", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    // The partial report is still written.
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["precision_met"], serde_json::Value::Bool(false));
}

#[test]
fn sweep_produces_monotone_certified_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let config = Path::new(REPO_CONFIGS).join("rational_sweep_n3.json");
    let run = atinv(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--svg",
    ]);
    assert!(run.status.success(), "stderr: {}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "r,value,lower,upper,status");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    let mut prev = f64::INFINITY;
    for row in &rows {
        assert_eq!(row[4], "ok");
        let v: f64 = row[1].parse().unwrap();
        assert!(v < prev, "sweep values must decrease strictly");
        prev = v;
    }
    assert!(out.with_extension("svg").exists());
    let svg = std::fs::read_to_string(out.with_extension("svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn sweep_exposes_the_parameter_power_law() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "divsweep.json",
        r#"{
            "version": 1,
            "spec": {
                "variant": "divisible",
                "gen": { "tail": [[1, {"num":1,"den":1}]] },
                "scale": { "offset": 2 },
                "r": { "num": 1, "den": 1 }
            },
            "sweep": { "r_grid": [
                { "num": 1, "den": 2 }, { "num": 1, "den": 1 }, { "num": 2, "den": 1 }
            ] }
        }"#,
    );
    let run = atinv(&["sweep", "--config", &config]);
    assert!(run.status.success());
    let csv = String::from_utf8(run.stdout).unwrap();
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    // Rows at r = 1/2, 1, 2: the base value's square root and square.
    assert!((values[0] - values[1].sqrt()).abs() < 1e-10);
    assert!((values[2] - values[1] * values[1]).abs() < 1e-10);
}

#[test]
fn distinguish_inverse_pair_via_mass_loss() {
    let config = Path::new(REPO_CONFIGS).join("distinguish_inverse_dyadic.json");
    let run = atinv(&["distinguish", "--config", config.to_str().unwrap()]);
    assert!(run.status.success(), "stderr: {}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    // Evaluation invariants coincide for inverted parameters...
    assert_eq!(report["eval_disjoint"], serde_json::Value::Bool(false));
    // ...but the shared-probe mass loss separates them.
    assert_eq!(report["verdict"], "distinguished");
    let probes = report["mass_loss"].as_array().unwrap();
    assert!(probes.iter().any(|p| p["disjoint"] == serde_json::Value::Bool(true)));
}

#[test]
fn distinguish_by_evaluation_invariant() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "pair.json",
        r#"{
            "version": 1,
            "spec": {
                "variant": "divisible",
                "gen": { "tail": [[1, {"num":1,"den":1}]] },
                "scale": { "offset": 2 },
                "r": { "num": 1, "den": 1 }
            },
            "spec_b": {
                "variant": "divisible",
                "gen": { "tail": [[1, {"num":1,"den":1}]] },
                "scale": { "offset": 2 },
                "r": { "num": 2, "den": 1 }
            }
        }"#,
    );
    let run = atinv(&["distinguish", "--config", &config]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["eval_disjoint"], serde_json::Value::Bool(true));
    assert_eq!(report["verdict"], "distinguished");
}

#[test]
fn distinguish_self_is_inconclusive() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "same.json",
        r#"{
            "version": 1,
            "spec": {
                "variant": "rational",
                "gen": { "tail": [[0, {"num":1,"den":1}], [1, {"num":1,"den":1}]] },
                "scale": { "offset": 3 },
                "r": { "num": 1, "den": 2 }
            },
            "spec_b": {
                "variant": "rational",
                "gen": { "tail": [[0, {"num":1,"den":1}], [1, {"num":1,"den":1}]] },
                "scale": { "offset": 3 },
                "r": { "num": 1, "den": 2 }
            }
        }"#,
    );
    let run = atinv(&["distinguish", "--config", &config]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["verdict"], "inconclusive");
}

#[test]
fn verify_suites_run_and_unknown_names_fail() {
    for suite in ["sin-cos", "dyadic-slices", "tensor-gap"] {
        let run = atinv(&["verify", "--suite", suite]);
        assert!(run.status.success(), "suite {suite}: {}", String::from_utf8_lossy(&run.stderr));
        let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
        assert_eq!(report["passed"], serde_json::Value::Bool(true), "suite {suite}");
    }
    let run = atinv(&["verify", "--suite", "nonsense"]);
    assert_eq!(run.status.code(), Some(2));
}
