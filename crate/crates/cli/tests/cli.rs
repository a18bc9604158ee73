use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fluctlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluctlab")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let out = fluctlab(&a);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exact_survival_csv() {
    let out = fluctlab(&["exact", "survival", "--law", "ssrw", "--x", "1", "--n", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,survival,absorbed,overshoot,loss"));
    let row3: Vec<&str> = lines.nth(3).unwrap().split(',').collect();
    assert_eq!(row3[0], "3");
    assert_eq!(row3[1].parse::<f64>().unwrap(), 0.375);
}

#[test]
fn rational_mode_prints_fractions() {
    let v = json(&["exact", "rational", "--law=-1:2/3,2:1/3", "--x", "1", "--n", "2"]);
    // from 1 only the +2 step survives the first move; from 3 nothing is killed
    assert_eq!(v["outputs"]["scalars"]["survival_exact"], "1/3");
}

#[test]
fn wiener_hopf_residual_is_reported_with_bound() {
    let v = json(&["series", "wh", "--law", "uniform3", "--N", "200"]);
    let out = &v["outputs"];
    assert!(out["scalars"]["residual"].as_f64().unwrap() < 1e-10);
    assert!(out["bounds"].get("residual").is_some());
    assert_eq!(out["passed"], true);
    assert_eq!(v["inputs_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    // usage error
    assert_eq!(fluctlab(&["exact", "survival", "--n", "x"]).status.code(), Some(1));
    assert_eq!(fluctlab(&["exact", "nonsense"]).status.code(), Some(1));
    assert_eq!(fluctlab(&["--help"]).status.code(), Some(0));
    // non-centred law where centring is required
    let out = fluctlab(&["harmonic", "w", "--law=-1:1/2,2:1/2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not centered"));
    // the variance-two kernel violates the chain assumptions
    assert_eq!(fluctlab(&["chain", "validate", "--kernel", "region-switched-var2"]).status.code(), Some(2));
    // the log-Pareto majorant admits no R: its tail is too heavy
    assert_eq!(fluctlab(&["chain", "w", "--majorant", "log-pareto:2"]).status.code(), Some(2));
}

#[test]
fn unknown_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "operation = \"series.wh\"\n[params]\norderr = 10\n").unwrap();
    let out = fluctlab(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn saved_config_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let direct = fluctlab(&[
        "simulate", "tg", "--law", "uniform3", "--n", "50", "--trials", "2000", "--seed", "11",
        "--save-config", cfg.to_str().unwrap(),
    ]);
    assert!(direct.status.success());
    let a = json(&["run", "--config", cfg.to_str().unwrap()]);
    let b = json(&["simulate", "tg", "--law", "uniform3", "--n", "50", "--trials", "2000", "--seed", "11"]);
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["inputs_hash"], b["inputs_hash"]);
}

#[test]
fn store_accumulates_records() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("results.jsonl");
    let s = store.to_str().unwrap();
    for n in ["5", "6", "7"] {
        assert!(fluctlab(&["exact", "survival", "--x", "1", "--n", n, "--store", s]).status.success());
    }
    let text = std::fs::read_to_string(&store).unwrap();
    let recs: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r["experiment"] == "exact.survival"));
    assert_ne!(recs[0]["inputs_hash"], recs[1]["inputs_hash"]);
}

#[test]
fn batch_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("tg.bin");
    let out = fluctlab(&["simulate", "tg", "--n", "20", "--trials", "500", "--batch", batch.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(Path::new(&batch).metadata().unwrap().len() > 0);
}

#[test]
fn verify_is_deterministic() {
    let run = || fluctlab(&["verify", "1,4,9", "--level", "quick", "--seed", "3"]);
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    let ids: Vec<u64> = v["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [1, 4, 9]);
    assert_eq!(v["passed"], 3);
}

#[test]
fn verify_rejects_unknown_ids() {
    assert_eq!(fluctlab(&["verify", "15"]).status.code(), Some(1));
}
