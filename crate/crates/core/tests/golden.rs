//! Regression against a small stored checkpoint.
//!
//! Regenerate with `cargo test --release --test golden -- --ignored` after a
//! deliberate change to the model, the loss or the data generator.

use std::path::PathBuf;

use gaitspace::formats::Checkpoint;
use gaitspace::pipeline::{generate_dataset, held_out_fit, train_and_identify, Evaluation};
use gaitspace::RunConfig;

const DATA_SEED: u64 = 7;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_checkpoint.json")
}

fn recipe() -> RunConfig {
    let mut config = RunConfig::desk();
    config.data.trajectories = 6;
    config.data.duration_s = 4.0;
    config.model.hidden_width = 16;
    config.training.steps = 300;
    config
}

#[test]
fn stored_checkpoint_reproduces_its_held_out_error() {
    let config = recipe();
    let text = std::fs::read_to_string(golden_path()).unwrap();
    let golden = Checkpoint::from_json(&text).unwrap();
    let dataset = generate_dataset(&config, DATA_SEED).unwrap();
    let eval = Evaluation::new(&golden.model, &dataset, &config, golden.training.seed).unwrap();
    let mse = held_out_fit(&golden.model, &eval).unwrap().reconstruction_mse;
    let stored = golden.training.held_out_mse.unwrap();
    assert!((mse - stored).abs() <= 1e-6, "held-out MSE {mse} vs stored {stored}");
}

#[test]
fn retraining_reproduces_the_stored_checkpoint() {
    let config = recipe();
    let golden = Checkpoint::from_json(&std::fs::read_to_string(golden_path()).unwrap()).unwrap();
    let dataset = generate_dataset(&config, DATA_SEED).unwrap();
    let trained = train_and_identify(&dataset, &config).unwrap();
    let (a, b) = (trained.metadata.final_total, golden.training.final_total);
    assert!((a - b).abs() <= 1e-6, "final loss {a} vs stored {b}");
    assert_eq!(trained.outcome.model.drive_dimension, golden.model.drive_dimension);
}

#[test]
#[ignore = "rewrites tests/data/golden_checkpoint.json"]
fn regenerate_golden_checkpoint() {
    let config = recipe();
    let dataset = generate_dataset(&config, DATA_SEED).unwrap();
    let trained = train_and_identify(&dataset, &config).unwrap();
    let checkpoint = Checkpoint::new(trained.outcome.model, trained.metadata);
    std::fs::write(golden_path(), checkpoint.to_json()).unwrap();
}
