use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphsvx"))
        .args(args)
        .env_remove("GRAPHSVX_OUT")
        .output()
        .unwrap()
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

/// Small BA-Shapes dataset and a briefly trained model.
fn fixture() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (d, m) = (dir.path().join("data"), dir.path().join("model"));
    ok(&["dataset", "ba-shapes", "--base", "20", "--motifs", "4", "--out", s(&d)]);
    ok(&["train", "--data", s(&d), "--epochs", "30", "--out", s(&m)]);
    dir
}

#[test]
fn dataset_reports_node_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["dataset", "ba-shapes", "--base", "80", "--motifs", "20", "--seed", "0", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("180 nodes"));
    assert_eq!(json(&dir.path().join("manifest.json"))["num_nodes"], 180);
    assert!(dir.path().join("graph.txt").exists());
}

#[test]
fn invalid_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["dataset", "ba-hexagons", "--out", s(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["dataset", "ba-shapes", "--base", "lots"]).status.code(), Some(2));
}

#[test]
fn missing_data_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(run(&["train", "--data", s(&missing), "--out", s(dir.path())]).status.code(), Some(2));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("data");
    ok(&["dataset", "ba-shapes", "--base", "20", "--motifs", "4", "--out", s(&d)]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["train", "--data", s(&d), "--epochs", "20", "--seed", "3", "--out", s(out)]);
    }
    assert_eq!(fs::read(a.join("model.json")).unwrap(), fs::read(b.join("model.json")).unwrap());
    let metrics = json(&a.join("metrics.json"));
    assert_eq!(metrics["schema_version"], 1);
    assert!(metrics["test_accuracy"].is_number());
    // One log entry every ten epochs.
    assert_eq!(metrics["log"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_epochs_still_saves_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("data");
    ok(&["dataset", "tree-cycles", "--base", "15", "--motifs", "3", "--out", s(&d)]);
    ok(&["train", "--data", s(&d), "--epochs", "0", "--out", s(dir.path())]);
    assert!(dir.path().join("model.json").exists());
    assert!(json(&dir.path().join("metrics.json"))["train_accuracy"].is_number());
}

#[test]
fn oracle_matches_the_all_strategy() {
    let dir = fixture();
    let (d, m, e) = (dir.path().join("data"), dir.path().join("model/model.json"), dir.path().join("e"));
    ok(&["explain", "--data", s(&d), "--model", s(&m), "--node", "22", "--strategy", "all", "--oracle", "--out", s(&e)]);
    let doc = json(&e.join("explanation.json"));
    assert!(doc["oracle"]["max_deviation"].as_f64().unwrap() <= 1e-6);
    assert_eq!(doc["schema_version"], 1);
}

#[test]
fn samples_default_to_the_dataset_budget() {
    let dir = fixture();
    let (d, m, e) = (dir.path().join("data"), dir.path().join("model/model.json"), dir.path().join("e"));
    ok(&["explain", "--data", s(&d), "--model", s(&m), "--node", "22", "--out", s(&e)]);
    assert_eq!(json(&e.join("explanation.json"))["num_samples"], 400);
}

#[test]
fn alpha_splits_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let (d, m, e) = (dir.path().join("data"), dir.path().join("model"), dir.path().join("e"));
    ok(&["dataset", "ba-community", "--base", "15", "--motifs", "3", "--out", s(&d)]);
    ok(&["train", "--data", s(&d), "--epochs", "30", "--out", s(&m)]);
    let model = m.join("model.json");
    ok(&["explain", "--data", s(&d), "--model", s(&model), "--node", "20", "--lambda", "0", "--alpha", "0.5", "--out", s(&e)]);
    let doc = json(&e.join("explanation.json"));
    let sum = |key: &str| doc[key].as_array().unwrap().iter().map(|a| a["value"].as_f64().unwrap()).sum::<f64>();
    let gap = doc["full_prediction"].as_f64().unwrap() - doc["base_value"].as_f64().unwrap();
    assert!(!doc["phi_features"].as_array().unwrap().is_empty());
    assert!((sum("phi_nodes") - 0.5 * gap).abs() < 1e-6);
    assert!((sum("phi_features") - 0.5 * gap).abs() < 1e-6);
    assert_eq!(doc["options"]["alpha"], 0.5);
}

#[test]
fn empty_player_set_is_a_domain_error() {
    // An edgeless graph with constant features leaves nothing to explain.
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let rows = "0\n".repeat(10);
    fs::write(p.join("graph.txt"), format!("10 1\n{rows}\n")).unwrap();
    fs::write(p.join("graph.txt.labels"), "0\n1\n".repeat(5)).unwrap();
    let manifest = r#"{"schema_version": 1, "kind": null, "spec": null, "graphs": ["graph.txt"],
        "num_nodes": 10, "num_edges": 0, "ground_truth": null}"#;
    fs::write(p.join("manifest.json"), manifest).unwrap();
    ok(&["train", "--data", s(p), "--epochs", "1", "--out", s(p)]);
    let out = run(&["explain", "--data", s(p), "--model", s(&p.join("model.json")), "--node", "0", "--out", s(p)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no retained features"));
}

#[test]
fn noise_mode_needs_a_noisy_dataset() {
    let dir = fixture();
    let (d, m) = (dir.path().join("data"), dir.path().join("model/model.json"));
    let out = run(&["eval", "--mode", "noise", "--data", s(&d), "--model", s(&m), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn noise_mode_counts_noisy_features() {
    let dir = tempfile::tempdir().unwrap();
    let (d, m, o) = (dir.path().join("data"), dir.path().join("model"), dir.path().join("out"));
    ok(&["dataset", "ba-community", "--base", "15", "--motifs", "3", "--noisy-features", "0.2", "--out", s(&d)]);
    assert_eq!(json(&d.join("manifest.json"))["noisy_features"], serde_json::json!([10, 11]));
    ok(&["train", "--data", s(&d), "--epochs", "20", "--out", s(&m)]);
    let model = m.join("model.json");
    ok(&["eval", "--mode", "noise", "--data", s(&d), "--model", s(&model), "--samples", "60", "--targets", "5", "--out", s(&o)]);
    let csv = fs::read_to_string(o.join("histogram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(json(&o.join("noise.json"))["report"]["mean"].is_number());
}

#[test]
fn ablation_writes_one_row_per_strategy() {
    let dir = fixture();
    let (d, m, o) = (dir.path().join("data"), dir.path().join("model/model.json"), dir.path().join("o"));
    ok(&[
        "eval", "--mode", "ablation", "--strategies", "random,smarter-separate", "--samples", "60", "--data", s(&d), "--model", s(&m),
        "--out", s(&o),
    ]);
    let csv = fs::read_to_string(o.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("accuracy"));
}

#[test]
fn accuracy_and_timing_modes_write_reports() {
    let dir = fixture();
    let (d, m, o) = (dir.path().join("data"), dir.path().join("model/model.json"), dir.path().join("o"));
    ok(&["eval", "--mode", "accuracy", "--samples", "60", "--data", s(&d), "--model", s(&m), "--out", s(&o)]);
    assert!(json(&o.join("accuracy.json"))["accuracy"].is_number());
    ok(&["eval", "--mode", "timing", "--budgets", "100,200", "--targets", "3", "--data", s(&d), "--model", s(&m), "--out", s(&o)]);
    assert_eq!(fs::read_to_string(o.join("timing.csv")).unwrap().lines().count(), 3);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[dataset]\nkind = \"ba-shapes\"\nbase = 20\nmotifs = 4\n").unwrap();
    let a = dir.path().join("a");
    ok(&["--config", s(&cfg), "dataset", "--out", s(&a)]);
    assert_eq!(json(&a.join("manifest.json"))["num_nodes"], 40);
    let b = dir.path().join("b");
    ok(&["dataset", "--config", s(&cfg), "--motifs", "6", "--out", s(&b)]);
    assert_eq!(json(&b.join("manifest.json"))["num_nodes"], 50);
    fs::write(&cfg, "[dataset]\nbogus = 1\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "dataset", "ba-shapes"]).status.code(), Some(2));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_graphsvx"))
        .args(["dataset", "tree-grid", "--base", "15", "--motifs", "2"])
        .env("GRAPHSVX_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn nodes_file_results_do_not_depend_on_jobs() {
    let dir = fixture();
    let (d, m) = (dir.path().join("data"), dir.path().join("model/model.json"));
    let list = dir.path().join("nodes.txt");
    fs::write(&list, "22\n25\n30, 31\n").unwrap();
    let mut docs = Vec::new();
    for jobs in ["1", "3"] {
        let o = dir.path().join(format!("j{jobs}"));
        ok(&["explain", "--jobs", jobs, "--data", s(&d), "--model", s(&m), "--nodes-file", s(&list), "--samples", "60", "--out", s(&o)]);
        docs.push(fs::read_to_string(o.join("explanations.json")).unwrap());
    }
    assert_eq!(docs[0], docs[1]);
    let parsed: Value = serde_json::from_str(&docs[0]).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 4);
}

#[test]
fn global_node_set_and_graph_targets() {
    let dir = fixture();
    let (d, m, e) = (dir.path().join("data"), dir.path().join("model/model.json"), dir.path().join("e"));
    ok(&["explain", "--data", s(&d), "--model", s(&m), "--global-nodes", "22,23", "--samples", "80", "--out", s(&e)]);
    ok(&[
        "explain", "--data", s(&d), "--model", s(&m), "--node", "22", "--indirect-effect", "--path-fill", "target", "--kernel-scope", "full",
        "--samples", "80", "--out", s(&dir.path().join("e2")),
    ]);
    let opts = &json(&dir.path().join("e2/explanation.json"))["options"];
    assert_eq!(opts["path_fill"], "copy-target");
    assert_eq!(opts["masks"]["kernel_scope"], "full");
    assert_eq!(json(&e.join("explanation.json"))["target"]["kind"], "node-set");

    let g = tempfile::tempdir().unwrap();
    let (gd, gm, ge) = (g.path().join("data"), g.path().join("model"), g.path().join("e"));
    ok(&["dataset", "ba-2motifs", "--base", "8", "--motifs", "6", "--out", s(&gd)]);
    ok(&["train", "--data", s(&gd), "--epochs", "5", "--out", s(&gm)]);
    ok(&["explain", "--data", s(&gd), "--model", s(&gm.join("model.json")), "--graph", "2", "--samples", "80", "--out", s(&ge)]);
    assert_eq!(json(&ge.join("explanation.json"))["target"]["kind"], "graph");
    let out = run(&["explain", "--data", s(&gd), "--model", s(&gm.join("model.json")), "--graph", "99", "--out", s(&ge)]);
    assert_eq!(out.status.code(), Some(2));
}
