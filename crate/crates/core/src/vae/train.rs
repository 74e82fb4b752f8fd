//! Minibatch Adam training of the three networks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::dataset::Dataset;
use crate::gait_oracle::state::layout;
use crate::neural::{AdamConfig, AdamState};
use crate::vae::config::ModelConfig;
use crate::vae::loss::{total_loss, LossBreakdown};
use crate::vae::model::VaeModel;
use crate::vae::normalizer::Normalizer;
use crate::vae::samples::{split_trajectories, Corpus, SampleIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction of trajectories withheld for evaluation.
    pub held_out_fraction: f64,
    /// Smallest feature spread used for normalisation, as a fraction of the
    /// widest spread among features of the same physical quantity.
    pub std_floor_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            held_out_fraction: 0.2,
            std_floor_fraction: 0.05,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.held_out_fraction) {
            return Err(Error::Config(
                "training needs batch_size >= 1, learning_rate > 0 and held_out_fraction in [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.std_floor_fraction) {
            return Err(Error::Config("std_floor_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VaeModel,
    /// One entry per gradient step.
    pub history: Vec<LossBreakdown>,
    pub train_trajectories: Vec<usize>,
    pub held_out_trajectories: Vec<usize>,
    pub corpus: Corpus,
}

impl TrainOutcome {
    pub fn train_indices(&self) -> Vec<SampleIndex> {
        self.corpus.sample_indices(&self.train_trajectories)
    }

    pub fn held_out_indices(&self) -> Vec<SampleIndex> {
        self.corpus.sample_indices(&self.held_out_trajectories)
    }
}

/// Mean of `values[start..start + width]` (clamped to the slice).
pub fn window_mean(values: &[f64], start: usize, width: usize) -> f64 {
    let end = (start + width).min(values.len());
    let s = &values[start.min(end)..end];
    s.iter().sum::<f64>() / s.len().max(1) as f64
}

/// Fresh model with statistics from `dataset`, trained per `options`.
pub fn train(dataset: &Dataset, config: &ModelConfig, options: &TrainOptions) -> Result<TrainOutcome> {
    options.validate()?;
    config.validate(None)?;
    let normalizer =
        Normalizer::from_grouped_statistics(&dataset.mean, &dataset.std, &layout::GROUPS, options.std_floor_fraction)?;
    let mut model = VaeModel::new(config.clone(), normalizer, options.seed)?;
    let corpus = Corpus::new(dataset, config, &model.normalizer)?;
    let (train_ids, held_ids) = split_trajectories(dataset.trajectories.len(), options.held_out_fraction, options.seed);
    let indices = corpus.sample_indices(&train_ids);
    let history = train_on(&mut model, &corpus, &indices, options)?;
    Ok(TrainOutcome {
        model,
        history,
        train_trajectories: train_ids,
        held_out_trajectories: held_ids,
        corpus,
    })
}

/// Continue training `model` on the given samples.
pub fn train_on(
    model: &mut VaeModel,
    corpus: &Corpus,
    indices: &[SampleIndex],
    options: &TrainOptions,
) -> Result<Vec<LossBreakdown>> {
    options.validate()?;
    if indices.is_empty() {
        return Err(Error::InsufficientHistory { needed: model.config.history_ticks(), available: 0 });
    }
    let config = model.config.clone();
    let adam = AdamConfig { learning_rate: options.learning_rate, ..AdamConfig::default() };
    let nets = &mut model.networks;
    let mut opt = [
        AdamState::new(adam, &nets.encoder),
        AdamState::new(adam, &nets.decoder),
        AdamState::new(adam, &nets.predictor),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x7a11_5eed);
    let mut history = Vec::with_capacity(options.steps);
    let mut picks = Vec::with_capacity(options.batch_size);
    for step in 0..options.steps {
        picks.clear();
        picks.extend((0..options.batch_size).map(|_| indices[rng.random_range(0..indices.len())]));
        let noise = Array2::from_shape_fn((picks.len(), config.latent_dim), |_| rng.sample(StandardNormal));
        let batch = corpus.batch(&picks, noise);
        let (loss, grads) = total_loss(nets, &config, &batch, config.beta, config.gamma)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!(
                    "reconstruction {} kl {} bce {} (gradients finite: {})",
                    loss.reconstruction,
                    loss.kl,
                    loss.bce,
                    grads.is_finite()
                ),
            });
        }
        opt[0].step(&mut nets.encoder, &grads.encoder);
        opt[1].step(&mut nets.decoder, &grads.decoder);
        opt[2].step(&mut nets.predictor, &grads.predictor);
        history.push(loss);
    }
    Ok(history)
}
