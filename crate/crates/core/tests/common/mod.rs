//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use std::sync::OnceLock;

use gaitspace::config::RunConfig;
use gaitspace::formats::Dataset;
use gaitspace::pipeline::{generate_dataset, train_and_identify, TrainedModel};
use gaitspace::vae::{Normalizer, VaeModel};

/// Corpus seed of the reference desk-scale run.
pub const DATA_SEED: u64 = 1;

pub struct Fixture {
    pub config: RunConfig,
    pub dataset: Dataset,
    pub trained: TrainedModel,
    pub train_seconds: f64,
}

/// Desk-scale corpus and model, built once per test binary.
pub fn desk() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let config = RunConfig::desk();
        let dataset = generate_dataset(&config, DATA_SEED).expect("dataset");
        let start = std::time::Instant::now();
        let trained = train_and_identify(&dataset, &config).expect("training");
        Fixture { config, dataset, trained, train_seconds: start.elapsed().as_secs_f64() }
    })
}

/// Untrained desk-scale model with ordinary normalisation and dimension 0
/// standing in for the drive, for tests that only exercise plumbing.
pub fn untrained_model() -> VaeModel {
    let mut config = RunConfig::desk();
    config.data.trajectories = 2;
    config.data.duration_s = 4.0;
    let dataset = generate_dataset(&config, 0).expect("dataset");
    let normalizer = Normalizer::from_statistics(&dataset.mean, &dataset.std).expect("normalizer");
    let mut model = VaeModel::new(config.model.clone(), normalizer, 3).expect("model");
    model.drive_dimension = Some(0);
    model
}
