use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn oakcrowd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oakcrowd")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"{"k":3,"workers":12,"items":400,"labels_per_item":3,"auditor_fraction":0.3,
    "population":{"per_type":{"p":{"uniform":[0.4,0.95]}}},"seed":3}"#;

fn generated(dir: &TempDir) -> std::path::PathBuf {
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let prefix = dir.path().join("syn");
    let out = oakcrowd(&["gen", "--config", s(&cfg), "--out", s(&prefix)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    prefix
}

fn file(prefix: &Path, suffix: &str) -> String {
    format!("{}.{suffix}.jsonl", prefix.display())
}

#[test]
fn gen_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (pa, pb) = (generated(&a), generated(&b));
    for suffix in ["dataset", "truth", "auditor"] {
        let (x, y) = (fs::read(file(&pa, suffix)).unwrap(), fs::read(file(&pb, suffix)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{suffix} differs");
    }
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"k":1,"workers":2"#).unwrap();
    let out = oakcrowd(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_fails_with_one() {
    let out = oakcrowd(&["train", "--data", "/nonexistent/data.jsonl", "--out", "/nonexistent/m.json"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn train_then_estimate() {
    let dir = TempDir::new().unwrap();
    let prefix = generated(&dir);
    let model = dir.path().join("model.json");
    let out = oakcrowd(&[
        "train", "--data", &file(&prefix, "dataset"), "--auditor", &file(&prefix, "auditor"),
        "--estimator", "poak-irt", "--multipoint", "3", "--out", s(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let preds = dir.path().join("pred.jsonl");
    let out = oakcrowd(&[
        "estimate", "--model", s(&model), "--labels", &file(&prefix, "dataset"),
        "--thresholds", "0.9,0.8,1.0", "--out", s(&preds),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().count(), 400);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let c = v["confidence"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&c));
        let used = v["labels_used"].as_u64().unwrap();
        assert!((1..=3).contains(&used));
    }

    // An OAK-only model lacks the blocks the logistic variant needs.
    let oak = dir.path().join("oak.json");
    assert_eq!(code(&oakcrowd(&["train", "--data", &file(&prefix, "dataset"), "--out", s(&oak)])), 0);
    let out = oakcrowd(&[
        "estimate", "--model", s(&oak), "--labels", &file(&prefix, "dataset"), "--estimator", "poaki",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

#[test]
fn empty_estimate_input_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let prefix = generated(&dir);
    let model = dir.path().join("model.json");
    assert_eq!(code(&oakcrowd(&["train", "--data", &file(&prefix, "dataset"), "--out", s(&model)])), 0);
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = oakcrowd(&["estimate", "--model", s(&model), "--labels", s(&empty)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_method_and_flags_exit_two() {
    let dir = TempDir::new().unwrap();
    let prefix = generated(&dir);
    let data = file(&prefix, "dataset");
    let out = oakcrowd(&["eval", "--train", &data, "--methods", "oak-weight,best", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("poak-weight"));
    assert_eq!(code(&oakcrowd(&["train", "--data", &data, "--out", "m.json", "--shift-fit", "ols"])), 2);
    assert_eq!(code(&oakcrowd(&["train", "--bogus"])), 2);
}

#[test]
fn eval_writes_curves_and_summary() {
    let dir = TempDir::new().unwrap();
    let prefix = generated(&dir);
    let out_dir = dir.path().join("eval");
    let out = oakcrowd(&[
        "eval", "--train", &file(&prefix, "dataset"), "--auditor", &file(&prefix, "auditor"),
        "--truth", &file(&prefix, "truth"), "--methods", "poak-weight,oak-weight,uniform",
        "--trials", "3", "--grid", "11", "--bootstrap", "200", "--svg", "--out", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    assert!(csv.starts_with("method,tau,cost,quality"));
    assert!(fs::read_to_string(out_dir.join("curves.svg")).unwrap().contains("<svg"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("rauc.json")).unwrap()).unwrap();
    let summary = report["summary"].as_array().unwrap();
    assert_eq!(summary.len(), 3);
    let uniform = summary.iter().find(|m| m["method"] == "uniform").unwrap();
    assert_eq!(uniform["mean"].as_f64().unwrap(), 0.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("poak-weight"));
}
