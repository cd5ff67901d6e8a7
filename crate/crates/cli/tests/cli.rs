use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .env_remove("CASCADE_STATE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}, stderr {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

/// Writes a synthetic fixture into `dir` and returns its config path.
fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out", out, "--n", "100", "--dim", "16", "--queries", "30"];
    args.extend_from_slice(extra);
    stdout_json(&cascade(&args));
    dir.join("config.toml")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_creates_state_and_refuses_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &["--widths", "4,16", "--costs", "1,3", "--m", "10", "--k", "5"]);
    let built = stdout_json(&cascade(&["build", "--config", path(&config)]));
    assert_eq!(built["n"], 100);
    assert_eq!(built["build_cost"], 100.0);

    let matrix = cascade_core::store::read_matrix(dir.path().join("state/level0.csc")).unwrap();
    assert_eq!(matrix.len(), 100);
    assert_eq!(matrix.dim(), 4);

    let again = cascade(&["build", "--config", path(&config)]);
    assert_eq!(again.status.code(), Some(2));
    let err = stderr_json(&again);
    assert_eq!(err["error"], "state_exists");
    assert!(err["message"].as_str().unwrap().contains("state exists"));

    let forced = cascade(&["build", "--config", path(&config), "--force"]);
    assert!(forced.status.success());
    assert!(!dir.path().join("state/cascade.lock").exists());
}

#[test]
fn missing_collection_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &[]);
    fs::remove_file(dir.path().join("collection.txt")).unwrap();
    let out = cascade(&["build", "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("collection.txt"), "{err}");
}

#[test]
fn query_charges_once_and_reports_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &["--widths", "4,8,16", "--costs", "1,2,5", "--m", "20,5", "--k", "5"]);
    stdout_json(&cascade(&["build", "--config", path(&config)]));

    let first = stdout_json(&cascade(&["query", "--config", path(&config), "7"]));
    assert_eq!(first["results"].as_array().unwrap().len(), 5);
    let charged: Vec<u64> = first["cost_charged"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["new_encodings"].as_u64().unwrap())
        .collect();
    assert_eq!(charged, vec![20, 5]);

    let second = stdout_json(&cascade(&["query", "--config", path(&config), "7"]));
    assert_eq!(second["results"], first["results"]);
    assert!(second["cost_charged"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["new_encodings"] == 0));
}

#[test]
fn single_tier_query_matches_level0_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &["--widths", "16", "--costs", "1", "--k", "100"]);
    stdout_json(&cascade(&["build", "--config", path(&config)]));
    let out = stdout_json(&cascade(&["query", "--config", path(&config), "3", "--k", "100"]));
    let ids: Vec<u64> = out["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["id"].as_u64().unwrap())
        .collect();

    let images = cascade_core::store::read_matrix(dir.path().join("images.csc")).unwrap();
    let queries = cascade_core::store::read_matrix(dir.path().join("queries.csc")).unwrap();
    let q = queries.get(3).unwrap();
    let mut oracle: Vec<(u64, f64)> = images
        .rows()
        .map(|(id, v)| (id, v.iter().zip(q).map(|(a, b)| *a as f64 * *b as f64).sum()))
        .collect();
    oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    assert_eq!(ids, oracle.iter().map(|p| p.0).collect::<Vec<_>>());
}

#[test]
fn query_errors_have_stable_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &["--m", "10", "--k", "5"]);

    let unbuilt = cascade(&["query", "--config", path(&config), "1"]);
    assert_eq!(unbuilt.status.code(), Some(2));

    stdout_json(&cascade(&["build", "--config", path(&config)]));
    let unknown = cascade(&["query", "--config", path(&config), "999"]);
    assert_eq!(unknown.status.code(), Some(4));
    assert_eq!(stderr_json(&unknown)["error"], "unknown_query");

    let too_many = cascade(&["query", "--config", path(&config), "1", "--k", "11"]);
    assert_eq!(too_many.status.code(), Some(2));
    assert_eq!(stderr_json(&too_many)["error"], "invalid_config");
}

#[test]
fn corrupt_state_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &[]);
    stdout_json(&cascade(&["build", "--config", path(&config)]));
    let level0 = dir.path().join("state/level0.csc");
    let mut bytes = fs::read(&level0).unwrap();
    let last = bytes.len() - 10;
    bytes[last] ^= 0xff;
    fs::write(&level0, bytes).unwrap();
    let out = cascade(&["query", "--config", path(&config), "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"], "checksum_mismatch");
}

#[test]
fn held_lock_blocks_mutating_commands() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &[]);
    stdout_json(&cascade(&["build", "--config", path(&config)]));
    fs::write(dir.path().join("state/cascade.lock"), "1\n").unwrap();
    let out = cascade(&["query", "--config", path(&config), "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "locked");
    // read-only commands ignore the lock
    let truth = dir.path().join("truth.tsv");
    assert!(cascade(&["eval", "--config", path(&config), "--truth", path(&truth)]).status.success());
}

#[test]
fn state_dir_can_be_overridden_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &[]);
    let elsewhere = dir.path().join("other-state");
    let out = Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(["build", "--config", path(&config)])
        .env("CASCADE_STATE_DIR", &elsewhere)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(elsewhere.join("manifest.json").exists());
    assert!(!dir.path().join("state").exists());
}

#[test]
fn eval_is_read_only_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &["--noise", "0.1"]);
    stdout_json(&cascade(&["build", "--config", path(&config)]));
    stdout_json(&cascade(&["query", "--config", path(&config), "2"]));
    let ledger = dir.path().join("state/ledger.json");
    let before = fs::read(&ledger).unwrap();

    let truth = dir.path().join("truth.tsv");
    let out = stdout_json(&cascade(&["eval", "--config", path(&config), "--truth", path(&truth)]));
    assert_eq!(fs::read(&ledger).unwrap(), before);
    // near-noiseless captions find their document
    assert_eq!(out["recall"]["recall"]["1"], 1.0);
    let table = out["table_csv"].as_str().unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "dataset,method,R@1,R@5,R@10,speedup");
    assert!(lines[1].starts_with("synthetic,cascade,100.0,100.0,100.0,"), "{}", lines[1]);
}

#[test]
fn simulate_reports_cost_model() {
    let out = stdout_json(&cascade(&[
        "simulate", "--n", "100", "--f", "0.1", "--t", "1,3",
    ]));
    assert!((out["lifetime_cost"].as_f64().unwrap() - 130.0).abs() < 1e-9);
    assert!((out["two_level_speedup"].as_f64().unwrap() - 3.0 / 1.3).abs() < 1e-12);

    let table = stdout_json(&cascade(&["simulate", "--f", "0.1", "--t", "0.2125,1"]));
    assert!((table["two_level_speedup"].as_f64().unwrap() - 3.2).abs() < 1e-12);

    let deep = stdout_json(&cascade(&[
        "simulate", "--t", "1,3.3", "--m", "50,10",
    ]));
    assert!((deep["query_speedup"].as_f64().unwrap() - 165.0 / 83.0).abs() < 1e-9);

    let solved = stdout_json(&cascade(&[
        "simulate", "--t", "1,3.3", "--m", "50", "--target-speedup", "2",
    ]));
    assert_eq!(solved["solved_m2"], 10);

    let bad = cascade(&["simulate", "--n", "10", "--f", "1.5", "--t", "1,3"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_calibrates_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &[]);
    let out = stdout_json(&cascade(&[
        "simulate", "--calibrate", "--config", path(&config), "--f", "0.1", "--sample", "50",
    ]));
    let t = out["t"].as_array().unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t[0], 1.0);
    assert!(out["predicted_vs_realized_f"].is_null());
}

#[test]
fn workload_and_experiment_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path(), &["--m", "5", "--k", "5"]);
    stdout_json(&cascade(&["build", "--config", path(&config)]));
    let truth = dir.path().join("truth.tsv");
    let queries = dir.path().join("queries.txt");
    let generated = stdout_json(&cascade(&[
        "workload", "--config", path(&config), "--truth", path(&truth),
        "--target-f", "0.2", "--seed", "4", "--out", path(&queries),
    ]));
    let pilot = generated["pilot_f"].as_f64().unwrap();
    assert!((0.16..=0.24).contains(&pilot), "{pilot}");
    let lines = fs::read_to_string(&queries).unwrap().lines().count();
    assert_eq!(lines as u64, generated["queries"].as_u64().unwrap());

    let report = stdout_json(&cascade(&[
        "run-experiment", "--config", path(&config), "--truth", path(&truth),
        "--workload", path(&queries), "--ks", "1,5",
    ]));
    assert_eq!(report["lifetime"]["realized_f"].as_f64().unwrap(), pilot);
    let realized = report["realized_speedup"].as_f64().unwrap();
    assert!((realized - 4.0 / (1.0 + pilot * 4.0)).abs() < 1e-12, "{realized}");

    let sim = stdout_json(&cascade(&["simulate", "--config", path(&config), "--t", "1,4"]));
    assert_eq!(sim["predicted_vs_realized_f"]["realized"].as_f64().unwrap(), pilot);
    assert_eq!(sim["predicted_vs_realized_f"]["predicted"], 0.1);
}

#[test]
fn commands_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), &["--seed", "9"]);
    synth(b.path(), &["--seed", "9"]);
    for file in ["images.csc", "queries.csc", "truth.tsv", "collection.txt"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}
