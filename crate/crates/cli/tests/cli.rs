use std::path::Path;
use std::process::{Command, Output};

fn brewrate(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brewrate"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const FAST_GRIDS: &str = r#"
[grids.decision_tree]
max_depth = [4]
[grids.knn]
n_neighbors = [5]
[grids.mlp]
hidden_layer_sizes = [[16]]
[grids.extra_trees]
n_estimators = [10]
[grids.random_forest]
n_estimators = [10]
[grids.gbt]
n_estimators = [10]
max_depth = [3]
"#;

fn write_config(dir: &Path, extra: &str) {
    let text = format!(
        "threshold = 93.0\nseed = 3\nk_values = [10]\noutput_dir = \"out\"\n{extra}\n[input]\npath = \"corpus.csv\"\n[sweep]\ncandidates = [5, 10]\n{FAST_GRIDS}"
    );
    std::fs::write(dir.join("cfg.toml"), text).unwrap();
}

fn gen_corpus(dir: &Path, n: &str) {
    let o = brewrate(&["gen", "--seed", "3", "--n", n, "--out", "corpus.csv"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_is_deterministic_and_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), "200");
    let file = std::fs::read(dir.path().join("corpus.csv")).unwrap();
    let stdout = brewrate(&["gen", "--seed", "3", "--n", "200"], dir.path()).stdout;
    assert_eq!(file, stdout);
    assert_eq!(String::from_utf8(file).unwrap().lines().count(), 201);
    let other = brewrate(&["gen", "--seed", "4", "--n", "200"], dir.path()).stdout;
    assert_ne!(stdout, other);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&brewrate(&["--help"], d)), 0);
    assert_eq!(code(&brewrate(&["gen", "--seed", "1", "--n", "5"], d)), 1);
    assert_eq!(code(&brewrate(&["run", "--bogus"], d)), 1);
    assert_eq!(code(&brewrate(&["run"], d)), 1);
    assert_eq!(code(&brewrate(&["run", "--config", "missing.toml"], d)), 1);
    assert_eq!(code(&brewrate(&["run", "--input", "corpus.csv", "--seed", "1"], d)), 1);
    std::fs::write(d.join("bad.toml"), "seed = 1\n[input]\npath = \"x.csv\"\n").unwrap();
    let o = brewrate(&["run", "--config", "bad.toml"], d);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));
    write_config(d, "");
    assert_eq!(code(&brewrate(&["run", "--config", "cfg.toml"], d)), 1, "input file does not exist yet");
}

#[test]
fn run_writes_reports_and_score_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_corpus(d, "120");
    write_config(d, "");
    let o = brewrate(&["run", "--config", "cfg.toml", "--families", "decision_tree,gbt"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.join("out");
    for name in ["report.json", "manifest.json", "table_k10.txt", "sweep.csv", "cv_k10_gbt.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 2);

    let o = brewrate(&["score", "out/predictions_k10_gbt_val.csv"], d);
    assert_eq!(code(&o), 0);
    let scored: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let gbt = report["cells"].as_array().unwrap().iter().find(|c| c["family"] == "gbt").unwrap();
    assert_eq!(scored, gbt["result"]["val"]);
}

#[test]
fn failed_cells_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_corpus(d, "60");
    write_config(d, "families = [\"knn\"]");
    let cfg = std::fs::read_to_string(d.join("cfg.toml")).unwrap().replace("n_neighbors = [5]", "n_neighbors = [500]");
    std::fs::write(d.join("cfg.toml"), cfg).unwrap();
    let o = brewrate(&["run", "--config", "cfg.toml"], d);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("out/table_k10.txt").exists());
}

#[test]
fn sweep_subcommand_writes_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_corpus(d, "100");
    let o = brewrate(
        &["sweep", "--input", "corpus.csv", "--threshold", "93", "--seed", "1", "--out", "sw"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("chosen attribute count"));
    let csv = std::fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    assert!(csv.starts_with("count,train_score,val_score"));
}
