use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gaborlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaborlab")).args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn p_two_is_an_infeasible_plan() {
    let out = gaborlab(&["build-frame", "--p", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("infeasible block plan"), "{}", stderr(&out));
}

#[test]
fn stochastic_commands_require_a_seed() {
    for args in [
        &["inequalities", "khintchine"][..],
        &["counterexample", "thm52"],
        &["build-frame", "--blocks", "1"],
    ] {
        let out = gaborlab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains("seed is required"), "{}", stderr(&out));
    }
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = gaborlab(&["inequalities", "nope", "--seed", "1"]);
    assert!(!out.status.success());
}

#[test]
fn passing_suite_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaborlab(&["inequalities", "khintchine", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path());
    assert_eq!(r["command"], "inequalities khintchine");
    assert!(r["assertions"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(dir.path().join("khintchine.csv").exists());
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout["metrics"], r["metrics"]);
}

#[test]
fn failing_assertion_exits_one() {
    // summable weights make (Σ_{j≤n} w_j)/n^{p/2} decrease
    let out = gaborlab(&["counterexample", "thm42", "--alpha", "2", "--seed", "1", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("[FAIL] growth_monotone"));
}

#[test]
fn tolerance_below_rounding_fails_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = gaborlab(&["build-frame", "--blocks", "1", "--lambda", "geometric", "--seed", "1", "--corpus", "2", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let frame = dir.path().join("frame.json");
    let out = gaborlab(&["verify-frame", frame.to_str().unwrap(), "--seed", "1", "--corpus-size", "2", "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("[FAIL] reconstruction_error"), "{}", stderr(&out));
}

#[test]
fn frame_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = gaborlab(&["build-frame", "--blocks", "1", "--lambda", "geometric", "--seed", "4", "--corpus", "3", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let built = report(dir.path());
    assert_eq!(built["metrics"]["translates"], 37.0);
    assert!(dir.path().join("corpus.csv").exists());
    let frame = dir.path().join("frame.json");
    let vdir = tempfile::tempdir().unwrap();
    let out = gaborlab(&[
        "verify-frame",
        frame.to_str().unwrap(),
        "--seed",
        "4",
        "--corpus-size",
        "3",
        "--out",
        vdir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let verified = report(vdir.path());
    assert_eq!(verified["metrics"]["q"], built["metrics"]["q"]);
    assert_eq!(verified["metrics"]["corpus_max_ratio"], built["metrics"]["corpus_max_ratio"]);
    assert!(verified["metrics"]["max_relative_error"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "trials": 20, "ps": [3.0]}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = gaborlab(&[
        "inequalities",
        "khintchine",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(&out_dir);
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["trials"], 10);
    assert!(r["metrics"].get("p3.ratio_max").is_some());
    assert!(r["metrics"].get("p4.ratio_max").is_none());
}

#[test]
fn bad_config_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "bogus": 1}"#).unwrap();
    let out = gaborlab(&["inequalities", "khintchine", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("configuration error"));
}

#[test]
fn reruns_give_identical_metrics() {
    for args in [&["counterexample", "thm52", "--seed", "8"][..], &["inequalities", "lacunary", "--seed", "8"]] {
        let a = gaborlab(args);
        let b = gaborlab(args);
        assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
        let ma: Value = serde_json::from_slice(&a.stdout).unwrap();
        let mb: Value = serde_json::from_slice(&b.stdout).unwrap();
        assert_eq!(serde_json::to_string(&ma["metrics"]).unwrap(), serde_json::to_string(&mb["metrics"]).unwrap());
    }
}

#[test]
fn reports_carry_calibration_constants() {
    let out = gaborlab(&["counterexample", "thm52", "--seed", "20240601"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["calibration"]["thm52"]["hi"].as_f64().unwrap() > 1.0);
}
