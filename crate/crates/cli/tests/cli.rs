//! End-to-end runs of the `gaitspace` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
[data]
trajectories = 4
duration_s = 4.0

[model]
hidden_width = 16

[training]
steps = 60
"#;

fn gaitspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitspace"))
        .current_dir(dir)
        .env_remove("GAITSPACE_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_kind(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("a JSON error line");
    let v: Value = serde_json::from_str(line).unwrap();
    v["error"]["kind"].as_str().unwrap().to_owned()
}

fn small_config(dir: &Path) {
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
}

#[test]
fn gen_data_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let run = |out: &str, seed: &str| {
        stdout_json(&gaitspace(dir.path(), &["--config", "small.toml", "gen-data", "--out", out, "--seed", seed]))
    };
    let a = run("a.bin", "5");
    let b = run("b.bin", "5");
    let c = run("c.bin", "6");
    assert_eq!(a["sha256"], b["sha256"]);
    assert_ne!(a["sha256"], c["sha256"]);
    assert_eq!(a["trajectories"], 4);
    assert_eq!(std::fs::read(dir.path().join("a.bin")).unwrap(), std::fs::read(dir.path().join("b.bin")).unwrap());
}

#[test]
fn seed_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let flag = stdout_json(&gaitspace(dir.path(), &["--config", "small.toml", "gen-data", "--out", "a.bin", "--seed", "9"]));
    let out = Command::new(env!("CARGO_BIN_EXE_gaitspace"))
        .current_dir(dir.path())
        .env("GAITSPACE_SEED", "9")
        .args(["--config", "small.toml", "gen-data", "--out", "b.bin"])
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["sha256"], flag["sha256"]);
}

#[test]
fn train_then_evaluate_contacts() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    stdout_json(&gaitspace(dir.path(), &["--config", "small.toml", "gen-data", "--out", "d.bin", "--seed", "1"]));
    let summary = stdout_json(&gaitspace(
        dir.path(),
        &["--config", "small.toml", "train", "--data", "d.bin", "--out", "m.json", "--loss-csv", "loss.csv"],
    ));
    assert_eq!(summary["steps"], 60);
    let loss = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 61);

    let out = gaitspace(
        dir.path(),
        &["--config", "small.toml", "eval", "--suite", "contacts", "--model", "m.json", "--data", "d.bin"],
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.starts_with("suite,criterion,value,target,result\n"));
    assert!(table.contains("contacts,per_tick_accuracy,"));
    // A 60-step model need not meet the targets; it must either pass or say so.
    if !out.status.success() {
        assert_eq!(error_kind(&out), "criteria_failed");
    }

    let push = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/push.toml");
    let out = gaitspace(
        dir.path(),
        &["--config", "small.toml", "rollout", "--model", "m.json", "--scenario", push, "--threshold", "1e9", "--report", "r.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(doc["report"].is_object());
    assert!(doc["calibration"].is_null());
}

#[test]
fn gradcheck_passes_on_a_random_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaitspace(dir.path(), &["eval", "--suite", "gradcheck", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.lines().any(|l| l.starts_with("gradcheck,max_relative_error") && l.ends_with("PASS")), "{table}");
}

#[test]
fn usage_errors_exit_two_with_a_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing_model = gaitspace(dir.path(), &["eval", "--suite", "contacts"]);
    assert_eq!(missing_model.status.code(), Some(2));
    assert_eq!(error_kind(&missing_model), "usage");

    let unknown = gaitspace(dir.path(), &["fly"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(error_kind(&unknown), "usage");

    assert_eq!(gaitspace(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one_with_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.bin"), b"not a dataset").unwrap();
    let out = gaitspace(dir.path(), &["train", "--data", "bad.bin", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    let kind = error_kind(&out);
    assert_ne!(kind, "usage");

    let missing = gaitspace(dir.path(), &["train", "--data", "nowhere.bin", "--out", "m.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(error_kind(&missing), "io");
}
