use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_legible");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["fit"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn missing_dataset_and_bad_set_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(run(&["validate", "--data", s(&missing)]).status.code(), Some(2));
    let out = dir.path().join("d");
    let r = run(&["synth", "--out", s(&out), "--set", "em.bogus=1"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("em.bogus"));
}

#[test]
fn synth_counts_and_set_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&["synth", "--out", s(&d), "--counts", "1,1,1,1,1,1", "--set", "synth.seed=42"]);
    let manifest = json(&d.join("manifest.json"));
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 6);
    let rc = json(&d.join("run_config.json"));
    assert_eq!(rc["config"]["synth"]["seed"], 42);
    assert_eq!(rc["command"], "synth");
    assert_eq!(rc["config_hash"].as_str().unwrap().len(), 64);

    let v = ok(&["validate", "--data", s(&d)]);
    let report: Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(report["total"], 6);
}

#[test]
fn uncovered_training_set_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&["synth", "--out", s(&d), "--counts", "2,2,2,0,2,2"]);
    let r = run(&["fit", "--data", s(&d), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn fit_classify_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["synth", "--out", s(&p("train")), "--counts", "3,3,3,3,3,3"]);
    ok(&[
        "synth", "--out", s(&p("test")), "--counts", "1,1,1,1,1,1", "--seed", "5",
        "--first-trial-id", "500",
    ]);
    ok(&["fit", "--data", s(&p("train")), "--out", s(&p("m.json")), "--components", "1"]);
    let models = json(&p("m.json"));
    for entry in models["models"].as_object().unwrap().values() {
        for axis in entry["per_axis"].as_array().unwrap() {
            assert_eq!(axis["k"], 1);
        }
    }

    // Training trials are rejected by classify and eval alike.
    let leak = run(&["classify", "--data", s(&p("train")), "--models", s(&p("m.json")), "--trial", "1"]);
    assert_eq!(leak.status.code(), Some(4));
    let leak = run(&["eval", "--data", s(&p("train")), "--models", s(&p("m.json")), "--out", s(&p("e0"))]);
    assert_eq!(leak.status.code(), Some(4));

    let c = ok(&["classify", "--data", s(&p("test")), "--models", s(&p("m.json")), "--trial", "500"]);
    let v: Value = serde_json::from_slice(&c.stdout).unwrap();
    let total: f64 = v["posterior"].as_object().unwrap().values().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    ok(&[
        "eval", "--data", s(&p("test")), "--models", s(&p("m.json")), "--out", s(&p("e")),
        "--gates", "GHA+",
    ]);
    let report = json(&p("e").join("report.json"));
    assert_eq!(report["gates"].as_array().unwrap().len(), 1);
    assert_eq!(report["gates"][0]["gate"], "GHA+");
    assert!(p("e").join("rows.csv").exists());
    assert!(fs::read_to_string(p("e").join("rows.csv")).unwrap().starts_with("# tool=legible"));
}

#[test]
fn rerun_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["synth", "--out", s(d), "--counts", "2,1,1,1,1,2", "--seed", "9"]);
    }
    for f in ["manifest.json", "run_config.json", "trial_00001.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
