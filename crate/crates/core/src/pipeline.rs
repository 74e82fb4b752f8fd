//! End-to-end recipes shared by the command line, the session host and the
//! test suites: corpus synthesis, training with drive identification, and
//! threshold calibration.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::formats::{Dataset, TrainingMetadata};
use crate::gait_oracle::synthesize_dataset;
use crate::planner::{Calibration, PlannerOptions};
use crate::sim::{calibrate_nominal, Scenario, Warmup};
use crate::vae::eval::{contact_accuracy, knn_accuracy, latent_means_with_labels, reconstruction_mse, ContactAccuracy};
use crate::vae::identify::{gait_frequency, identify_drive_dimension, DriveIdentification};
use crate::vae::train::{train, window_mean, TrainOutcome};
use crate::vae::{split_trajectories, Corpus, VaeModel};

/// Steps averaged at each end of the loss curve.
pub const LOSS_WINDOW: usize = 100;

/// Synthesize the training corpus described by `config`.
pub fn generate_dataset(config: &RunConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    synthesize_dataset(
        config.data.trajectories,
        &config.data.twist_range,
        &config.gait,
        &config.sim.geometry,
        &config.oracle_options(),
        seed,
    )
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub outcome: TrainOutcome,
    pub identification: DriveIdentification,
    pub metadata: TrainingMetadata,
}

/// Start and end of a loss curve, each averaged over [`LOSS_WINDOW`] steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub steps: usize,
    /// Mean over the first window (the moving average at step 100).
    pub initial: f64,
    /// Mean over the last window.
    pub last: f64,
}

impl LossSummary {
    pub fn from_totals(totals: &[f64]) -> Self {
        let n = totals.len();
        Self {
            steps: n,
            initial: window_mean(totals, 0, LOSS_WINDOW),
            last: window_mean(totals, n.saturating_sub(LOSS_WINDOW), LOSS_WINDOW),
        }
    }

    /// Fractional fall from the initial to the final average.
    pub fn drop_fraction(&self) -> f64 {
        1.0 - self.last / self.initial
    }
}

/// Train on `dataset`, identify the drive dimension on the held-out
/// trajectories and fill in checkpoint metadata.
pub fn train_and_identify(dataset: &Dataset, config: &RunConfig) -> Result<TrainedModel> {
    config.validate()?;
    let mut outcome = train(dataset, &config.model, &config.training)?;
    let gait_hz = gait_frequency(config.gait.swing_duration, config.gait.full_stance_duration);
    let held = outcome.held_out_trajectories.clone();
    let identification = identify_drive_dimension(&mut outcome.model, &outcome.corpus, &held, gait_hz)?;
    let held_out_mse = reconstruction_mse(&outcome.model, &outcome.corpus, &outcome.held_out_indices())?;
    let h = &outcome.history;
    let tail = |f: fn(&crate::vae::LossBreakdown) -> f64| {
        let values: Vec<f64> = h.iter().map(f).collect();
        window_mean(&values, h.len().saturating_sub(LOSS_WINDOW), LOSS_WINDOW)
    };
    let metadata = TrainingMetadata {
        seed: config.training.seed,
        steps: h.len(),
        final_total: tail(|l| l.total),
        final_reconstruction: tail(|l| l.reconstruction),
        final_kl: tail(|l| l.kl),
        final_bce: tail(|l| l.bce),
        held_out_mse: Some(held_out_mse),
    };
    Ok(TrainedModel { outcome, identification, metadata })
}

impl TrainedModel {
    pub fn loss_summary(&self) -> LossSummary {
        let totals: Vec<f64> = self.outcome.history.iter().map(|l| l.total).collect();
        LossSummary::from_totals(&totals)
    }
}

/// Neighbours consulted by the stance classifier.
pub const KNN_K: usize = 5;
/// Every this-many-th training window serves as a classifier reference.
pub const KNN_REFERENCE_STRIDE: usize = 7;

/// A dataset re-split exactly as it was for training.
pub struct Evaluation {
    pub corpus: Corpus,
    pub train_trajectories: Vec<usize>,
    pub held_out_trajectories: Vec<usize>,
}

impl Evaluation {
    /// `training_seed` must be the seed the model was trained with.
    pub fn new(model: &VaeModel, dataset: &Dataset, config: &RunConfig, training_seed: u64) -> Result<Self> {
        let corpus = Corpus::new(dataset, &model.config, &model.normalizer)?;
        let (train_trajectories, held_out_trajectories) =
            split_trajectories(dataset.trajectories.len(), config.training.held_out_fraction, training_seed);
        Ok(Self { corpus, train_trajectories, held_out_trajectories })
    }

    pub fn from_outcome(outcome: &TrainOutcome) -> Self {
        Self {
            corpus: outcome.corpus.clone(),
            train_trajectories: outcome.train_trajectories.clone(),
            held_out_trajectories: outcome.held_out_trajectories.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStructure {
    /// Held-out stance classification accuracy from latent means.
    pub knn_accuracy: f64,
    pub drive_dimension: usize,
    /// Gait-frequency power of the drive dimension over the median dimension.
    pub power_ratio: f64,
    pub powers: Vec<f64>,
}

pub fn latent_structure(model: &VaeModel, eval: &Evaluation, gait_hz: f64) -> Result<LatentStructure> {
    let reference: Vec<_> = eval
        .corpus
        .sample_indices(&eval.train_trajectories)
        .into_iter()
        .step_by(KNN_REFERENCE_STRIDE)
        .collect();
    let held = eval.corpus.sample_indices(&eval.held_out_trajectories);
    let (a, la) = latent_means_with_labels(model, &eval.corpus, &reference)?;
    let (b, lb) = latent_means_with_labels(model, &eval.corpus, &held)?;
    let mut probe = model.clone();
    let id = identify_drive_dimension(&mut probe, &eval.corpus, &eval.held_out_trajectories, gait_hz)?;
    Ok(LatentStructure {
        knn_accuracy: knn_accuracy(&a, &la, &b, &lb, KNN_K),
        drive_dimension: id.dimension,
        power_ratio: id.power_ratio_to_median(),
        powers: id.powers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldOutFit {
    pub contacts: ContactAccuracy,
    pub reconstruction_mse: f64,
}

pub fn held_out_fit(model: &VaeModel, eval: &Evaluation) -> Result<HeldOutFit> {
    let held = eval.corpus.sample_indices(&eval.held_out_trajectories);
    Ok(HeldOutFit {
        contacts: contact_accuracy(model, &eval.corpus, &held)?,
        reconstruction_mse: reconstruction_mse(model, &eval.corpus, &held)?,
    })
}

/// Nominal trot of the disturbance experiments: the configured swing, stance
/// and forward twist, warm-started from the oracle, response enabled.
pub fn nominal_scenario(config: &RunConfig, duration_s: f64) -> Scenario {
    let e = &config.experiments;
    Scenario {
        duration_s,
        twist: e.twist,
        swing_s: e.swing_s,
        full_stance_s: e.full_stance_s,
        amplitude: None,
        auto_response: true,
        warmup: Warmup::Oracle { cycle_time_s: 0.0 },
        events: Vec::new(),
    }
}

/// Planner options with θ calibrated on a nominal rollout of `scenario`.
pub fn calibrated_planner(
    model: &VaeModel,
    config: &RunConfig,
    scenario: &Scenario,
    seed: u64,
) -> Result<(PlannerOptions, Calibration)> {
    let calibration_run = Scenario { duration_s: config.experiments.calibration_s, ..scenario.clone() };
    let calibration = calibrate_nominal(
        model,
        &config.planner,
        &config.sim,
        &calibration_run,
        config.experiments.k_sigma,
        seed,
    )?;
    Ok((PlannerOptions { threshold: calibration.threshold, ..config.planner.clone() }, calibration))
}
