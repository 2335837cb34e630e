use std::path::Path as FsPath;
use std::process::{Command, Output};

use serde_json::Value;

fn pathstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathstat"))
        .args(args)
        .env_remove("PATHSTAT_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(file: &FsPath) -> Value {
    serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap()
}

#[test]
fn analyze_constant_passes() {
    let out = pathstat(&["analyze", "generate:constant(2),L=1000"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["propertyT"]["pass"], true);
    assert_eq!(r["horizon"], 1000);
}

#[test]
fn analyze_monotone_reports_violations() {
    let out = pathstat(&["analyze", "generate:monotone(1),L=10000"]);
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["propertyT"]["pass"], false);
    assert!(r["propertyE"]["violations"].as_u64().unwrap() >= 1);
}

#[test]
fn analyze_rejects_nan_row() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.txt");
    std::fs::write(&file, "0.5\n1.5\nNaN\n2\n").unwrap();
    let out = pathstat(&["analyze", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    let missing = pathstat(&["analyze", dir.path().join("none.txt").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_and_match_schema() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = pathstat(&[
            "analyze",
            "generate:ar1(0.5,1,0),L=20000",
            "--seed",
            "5",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(matches!(out.status.code(), Some(0) | Some(2)));
    }
    for name in ["report.json", "trajectories.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between reruns");
    }
    let report = read_json(&a.join("report.json"));
    assert_eq!(report["seed"], 5);
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&report)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?}");
    // a mangled report must not validate
    let mut broken = report.clone();
    broken["ergodicity"]["verdict"] = Value::from("Maybe");
    assert!(!validator.is_valid(&broken));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k_max": 1, "grid_cells": 4, "seed": 9}"#).unwrap();
    let out = pathstat(&[
        "analyze",
        "generate:iid_normal(0,1,0),L=4000",
        "--k-max",
        "3",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    let r = json(&out);
    assert_eq!(r["config"]["k_max"], 1);
    assert_eq!(r["config"]["grid_cells"], 4);
    assert_eq!(r["seed"], 9);
    std::fs::write(&cfg, r#"{"kmax": 1}"#).unwrap();
    let out = pathstat(&[
        "analyze",
        "generate:constant(1),L=100",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_pathstat"));
        cmd.args(["analyze", "generate:iid_normal(0,1,0),L=3000"]);
        match env {
            Some(s) => cmd.env("PATHSTAT_SEED", s),
            None => cmd.env_remove("PATHSTAT_SEED"),
        };
        json(&cmd.output().unwrap())
    };
    assert_eq!(run(Some("7"))["seed"], 7);
    assert_eq!(run(None)["seed"], 0);
}

#[test]
fn generate_writes_one_value_per_line() {
    let out = pathstat(&["generate", "sine(pi/2,0),L=8"]);
    assert_eq!(out.status.code(), Some(0));
    let values: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
    assert_eq!(values.len(), 8);
    for (v, e) in values.iter().zip(expected) {
        assert!((v - e).abs() < 1e-12);
    }
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    let out = pathstat(&[
        "generate",
        "ar1(0.5,1,1)",
        "--length",
        "50",
        "--seed",
        "3",
        "-o",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&file).unwrap().lines().count(), 50);
    // and the file reads back as an input
    let out = pathstat(&["analyze", file.to_str().unwrap(), "--k-max", "1"]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
}

#[test]
fn testbench_flags_trend() {
    let dir = tempfile::tempdir().unwrap();
    let out = pathstat(&[
        "testbench",
        "generate:monotone(1),L=2000",
        "--test",
        "mean_split:20:0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["tests"][0]["upper_density"], 1.0);
    assert_eq!(s["compliant"], false);
    let csv = std::fs::read_to_string(dir.path().join("test0_mean_split_n20.csv")).unwrap();
    assert!(csv.starts_with("offset,indicator\n0,1\n"));
    assert_eq!(csv.lines().count(), 1 + 1981);
}

#[test]
fn testbench_calibrated_threshold_is_compliant() {
    let dir = tempfile::tempdir().unwrap();
    let tests = dir.path().join("tests.json");
    std::fs::write(
        &tests,
        r#"[{"kind": "threshold_exceedance", "n": 20, "alpha": 0.05,
             "calibration": {"generator": "iid_normal(0,1,0)", "replicates": 4000, "seed": 1}}]"#,
    )
    .unwrap();
    let out = pathstat(&[
        "testbench",
        "generate:iid_normal(0,1,0),L=100000",
        "--seed",
        "2",
        "--tests",
        tests.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let s = json(&out);
    let t = &s["tests"][0];
    assert!(t["upper_density"].as_f64().unwrap() <= 0.06);
    assert!((t["tau"].as_f64().unwrap() - 1.6449 / 20f64.sqrt()).abs() < 0.03);
    assert_eq!(t["calibration"]["replicates"], 4000);
}

#[test]
fn testbench_usage_errors() {
    let out = pathstat(&["testbench", "generate:constant(1),L=100"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pathstat(&[
        "testbench",
        "generate:constant(1),L=100",
        "--test",
        "mean_split:200:0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = pathstat(&[
        "testbench",
        "generate:constant(1),L=100",
        "--test",
        "adf:20:0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn montecarlo_deterministic_generators() {
    let out = pathstat(&[
        "montecarlo",
        "--generator",
        "monotone(1),L=10000",
        "--generator",
        "constant(2),L=10000",
        "--replicates",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let t = json(&out);
    assert_eq!(t["rows"][0]["pass_fraction"], 0.0);
    assert_eq!(t["rows"][1]["pass_fraction"], 1.0);
    assert_eq!(t["rows"][1]["standard_error"], 0.0);
}

#[test]
fn montecarlo_ar1_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let out = pathstat(&[
        "montecarlo",
        "--generator",
        "ar1(0.5,1,0)",
        "--length",
        "100000",
        "--replicates",
        "100",
        "--seed",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let t = read_json(&dir.path().join("coverage.json"));
    let p = t["rows"][0]["pass_fraction"].as_f64().unwrap();
    assert!(p >= 0.95, "pass fraction {p}");
    let csv = std::fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert!(csv.starts_with("generator,replicates,passes,pass_fraction,standard_error\n"));
}

#[test]
fn contract_dumps_trace() {
    let out = pathstat(&[
        "contract",
        "generate:block_mixture(0,5,1),L=100000",
        "--cell",
        "2.5:7.5",
        "--threshold",
        "0.75",
        "--trace",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = json(&out);
    assert_eq!(c["validation"]["ordering"], true);
    assert_eq!(c["steps"].as_array().unwrap().len(), 4);
    assert_eq!(c["n_markers"].as_array().unwrap().len(), 3);
    let gap = c["contracted_density"].as_f64().unwrap() - c["global_density"].as_f64().unwrap();
    assert!(gap > 0.3);
    let brief = pathstat(&[
        "contract",
        "generate:block_mixture(0,5,1),L=100000",
        "--cell",
        "2.5:7.5",
    ]);
    assert!(json(&brief).get("steps").is_none());
    let none = pathstat(&[
        "contract",
        "generate:constant(1),L=1000",
        "--cell",
        "5:6",
        "--threshold",
        "0.5",
    ]);
    assert_eq!(none.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&none.stderr).contains("construction failed"));
}

#[test]
fn usage_exit_codes() {
    assert_eq!(pathstat(&["--help"]).status.code(), Some(0));
    assert_eq!(pathstat(&["--version"]).status.code(), Some(0));
    assert_eq!(pathstat(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pathstat(&["analyze"]).status.code(), Some(1));
}
