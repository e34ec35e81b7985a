use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn aes_select(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aes-select"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = aes_select(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn fails_with(args: &[&str], code: i32) -> String {
    let out = aes_select(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Work(TempDir);

impl Work {
    fn new() -> Self {
        Work(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.0.path().join(name), text).unwrap();
        self.path(name)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_slice(&std::fs::read(self.0.path().join(name)).unwrap()).unwrap()
    }

    fn csv_rows(&self, name: &str) -> Vec<csv::StringRecord> {
        csv::Reader::from_path(self.0.path().join(name))
            .unwrap()
            .records()
            .map(|r| r.unwrap())
            .collect()
    }

    fn simulate(&self, kind: &str, dir: &str) -> PathBuf {
        ok(&["simulate", "--kind", kind, "--out", &self.path(dir)]);
        Path::new(&self.path(dir)).join("corpus.csv")
    }
}

#[test]
fn simulated_corpora_have_expected_shape() {
    let w = Work::new();
    w.simulate("accuracy", "acc");
    w.simulate("trajectory", "traj");
    assert_eq!(w.csv_rows("acc/corpus.csv").len(), 200);
    assert_eq!(w.csv_rows("traj/corpus.csv").len(), 3000 * 4);
    let manifest = w.json("traj/manifest.json");
    assert_eq!(manifest["command"], "simulate");
    assert!(manifest["seed"].is_u64());
}

#[test]
fn same_seed_same_bytes() {
    let w = Work::new();
    for dir in ["a", "b"] {
        ok(&["simulate", "--kind", "trajectory", "--seed", "11", "--out", &w.path(dir)]);
    }
    ok(&["simulate", "--kind", "trajectory", "--seed", "12", "--out", &w.path("c")]);
    let read = |d: &str| std::fs::read(w.0.path().join(d).join("corpus.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn three_layer_fit_recovers_positive_mean() {
    let w = Work::new();
    let corpus = w.simulate("accuracy", "acc");
    ok(&["fit", "--method", "gmm3", "--corpus", corpus.to_str().unwrap(), "--out", &w.path("fit")]);
    let fit = w.json("fit/fit.json");
    let aes = fit["result"]["aes"].as_f64().unwrap();
    assert!((aes - 2.0).abs() < 0.6, "aes {aes}");
    assert_eq!(fit["result"]["params"]["means"][1], 0.0);
}

#[test]
fn single_component_gmm_matches_pooled() {
    let w = Work::new();
    let corpus = w.simulate("accuracy", "acc");
    let corpus = corpus.to_str().unwrap();
    let cfg = w.write("k1.json", r#"{"k": 1, "fix_flat_mean": false, "penalized": false}"#);
    ok(&["fit", "--method", "gmm3", "--config", &cfg, "--corpus", corpus, "--out", &w.path("k1")]);
    ok(&["fit", "--method", "pooled", "--corpus", corpus, "--out", &w.path("pooled")]);
    let gmm = w.json("k1/fit.json")["result"]["params"]["means"][0].as_f64().unwrap();
    let pooled = w.json("pooled/fit.json")["result"]["mu0"].as_f64().unwrap();
    assert!((gmm - pooled).abs() <= 1e-6, "{gmm} vs {pooled}");
}

#[test]
fn corrupt_corpus_reports_line() {
    let w = Work::new();
    let corpus = w.simulate("accuracy", "acc");
    let mut text = std::fs::read_to_string(&corpus).unwrap();
    let third = text.lines().nth(2).unwrap().to_string();
    let broken = third.replacen(',', ",x", 3);
    text = text.replacen(&third, &broken, 1);
    let bad = w.write("bad.csv", &text);
    let err = fails_with(&["fit", "--method", "gmm3", "--corpus", &bad, "--out", &w.path("fit")], 2);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_corpus_and_bad_config_are_errors() {
    let w = Work::new();
    fails_with(&["optimize", "--corpus", &w.path("nope.csv"), "--out", &w.path("o")], 2);
    let corpus = w.simulate("trajectory", "traj");
    let typo = w.write("typo.json", r#"{"horizon_weekz": 10}"#);
    let err = fails_with(
        &["optimize", "--config", &typo, "--corpus", corpus.to_str().unwrap(), "--out", &w.path("o")],
        2,
    );
    assert!(err.contains("horizon_weekz"), "{err}");
}

#[test]
fn optimize_grid_edge_cases() {
    let w = Work::new();
    let corpus = w.simulate("trajectory", "traj");
    let corpus = corpus.to_str().unwrap();

    ok(&["optimize", "--corpus", corpus, "--out", &w.path("full")]);
    let profile = w.csv_rows("full/profile.csv");
    assert_eq!(profile.len(), 50);
    assert_eq!(profile.iter().filter(|r| &r[r.len() - 1] == "true").count(), 1);

    let single = w.write("single.json", r#"{"grid": [0.7]}"#);
    ok(&["optimize", "--config", &single, "--corpus", corpus, "--out", &w.path("single")]);
    assert_eq!(w.json("single/optimum.json")["result"]["best_aes"], 0.7);

    let zero = w.write("zero.json", r#"{"grid": [0.0, 0.5]}"#);
    fails_with(&["optimize", "--config", &zero, "--corpus", corpus, "--out", &w.path("zero")], 2);
}

#[test]
fn evaluate_trajectory_table() {
    let w = Work::new();
    let corpus = w.simulate("trajectory", "traj");
    ok(&["evaluate", "--corpus", corpus.to_str().unwrap(), "--out", &w.path("eval")]);
    let rows = w.csv_rows("eval/report.csv");
    let methods: Vec<&str> = rows.iter().map(|r| r.get(0).unwrap()).collect();
    assert_eq!(methods, ["pooled_mle", "two_layer_gmm", "three_layer_gmm", "utility_max"]);
    let header = csv::Reader::from_path(w.0.path().join("eval/report.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert!(header.iter().any(|h| h == "avg_reward"));
    let report = w.json("eval/report.json");
    assert!(report["config"]["utility"]["grid"].is_array());
}

#[test]
fn evaluate_subset_and_empty_methods() {
    let w = Work::new();
    let corpus = w.simulate("trajectory", "traj");
    let corpus = corpus.to_str().unwrap();
    ok(&["evaluate", "--corpus", corpus, "--methods", "gmm3,pooled", "--out", &w.path("two")]);
    assert_eq!(w.csv_rows("two/report.csv").len(), 2);
    fails_with(&["evaluate", "--corpus", corpus, "--methods", "", "--out", &w.path("none")], 2);
}

#[test]
fn evaluate_accuracy_table() {
    let w = Work::new();
    let small = w.write("small.json", r#"{"sim": {"replications": 5}}"#);
    ok(&["evaluate", "--kind", "accuracy", "--config", &small, "--out", &w.path("acc")]);
    let rows = w.csv_rows("acc/accuracy.csv");
    assert_eq!(rows.len(), 3);
    let estimates = w.csv_rows("acc/estimates.csv");
    assert_eq!(estimates.len(), 15);
}

#[test]
fn report_summarizes_corpus() {
    let w = Work::new();
    let corpus = w.simulate("trajectory", "traj");
    ok(&["report", "--corpus", corpus.to_str().unwrap(), "--bins", "20", "--out", &w.path("rep")]);
    let hist = w.csv_rows("rep/histogram.csv");
    assert_eq!(hist.len(), 20);
    let total: u64 = hist.iter().map(|r| r[r.len() - 1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 3000);
}
