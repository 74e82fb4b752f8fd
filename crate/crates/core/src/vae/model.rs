use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{FlatParams, Mlp};
use crate::vae::config::{ModelConfig, ACTION_DIM, CONTACT_FEET};
use crate::vae::normalizer::Normalizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    Sample,
    Mean,
}

/// Diagonal-Gaussian posterior over the latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
    pub sample: Vec<f64>,
}

impl LatentState {
    /// `½ Σ (μ² + σ² − 1 − log σ²)`.
    pub fn kl_divergence(&self) -> f64 {
        kl_divergence(&self.mean, &self.log_variance)
    }
}

pub fn kl_divergence(mean: &[f64], log_variance: &[f64]) -> f64 {
    0.5 * mean
        .iter()
        .zip(log_variance)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// Encoder, decoder and contact predictor weights.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeNetworks {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub predictor: Mlp,
}

impl VaeNetworks {
    pub fn new(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            encoder: Mlp::new(&config.encoder_sizes(), &mut rng),
            decoder: Mlp::new(&config.decoder_sizes(), &mut rng),
            predictor: Mlp::new(&config.predictor_sizes(), &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            predictor: self.predictor.zeros_like(),
        }
    }

    fn nets(&self) -> [&Mlp; 3] {
        [&self.encoder, &self.decoder, &self.predictor]
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (n, net) in self.nets().iter().enumerate() {
            if index < net.param_count() {
                return (n, index);
            }
            index -= net.param_count();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.nets().iter().all(|n| n.is_finite())
    }

    /// Flat offset of the first parameter of `network` (0 encoder, 1 decoder, 2 predictor).
    pub fn network_offset(&self, network: usize) -> usize {
        self.nets()[..network].iter().map(|n| n.param_count()).sum()
    }
}

impl FlatParams for VaeNetworks {
    fn param_count(&self) -> usize {
        self.nets().iter().map(|n| n.param_count()).sum()
    }

    fn get(&self, index: usize) -> f64 {
        let (n, i) = self.locate(index);
        self.nets()[n].param(i)
    }

    fn set(&mut self, index: usize, value: f64) {
        let (n, i) = self.locate(index);
        let net = match n {
            0 => &mut self.encoder,
            1 => &mut self.decoder,
            _ => &mut self.predictor,
        };
        *net.param_mut(i) = value;
    }

    fn label(&self, index: usize) -> String {
        let (n, i) = self.locate(index);
        let name = ["encoder", "decoder", "predictor"][n];
        format!("{name}.{}", self.nets()[n].param_label(i))
    }
}

/// Trained (or freshly initialised) gait model.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub config: ModelConfig,
    pub networks: VaeNetworks,
    pub normalizer: Normalizer,
    pub drive_dimension: Option<usize>,
}

impl VaeModel {
    pub fn new(config: ModelConfig, normalizer: Normalizer, seed: u64) -> Result<Self> {
        config.validate(None)?;
        if normalizer.dim() != config.state_dim {
            return Err(Error::DimensionMismatch {
                context: "normalizer",
                expected: config.state_dim,
                actual: normalizer.dim(),
            });
        }
        let networks = VaeNetworks::new(&config, seed);
        Ok(Self {
            config,
            networks,
            normalizer,
            drive_dimension: None,
        })
    }

    /// Check that every network matches the configured shapes.
    pub fn validate(&self) -> Result<()> {
        self.config.validate(None)?;
        self.normalizer.validate()?;
        for (name, net, sizes) in [
            ("encoder", &self.networks.encoder, self.config.encoder_sizes()),
            ("decoder", &self.networks.decoder, self.config.decoder_sizes()),
            ("predictor", &self.networks.predictor, self.config.predictor_sizes()),
        ] {
            if net.sizes() != sizes {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has layer sizes {:?}, config implies {:?}",
                    net.sizes(),
                    sizes
                )));
            }
        }
        if self.normalizer.dim() != self.config.state_dim {
            return Err(Error::ShapeMismatch("normalizer width differs from state_dim".into()));
        }
        if let Some(d) = self.drive_dimension {
            if d >= self.config.latent_dim {
                return Err(Error::ShapeMismatch(format!("drive dimension {d} >= latent_dim")));
            }
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Encode a normalised window. `noise` is used in sample mode; `None` draws zeros.
    pub fn encode(&self, window: &[f64], mode: EncodeMode, noise: Option<&[f64]>) -> Result<LatentState> {
        let out = self.networks.encoder.infer_vec(window)?;
        let dz = self.latent_dim();
        let (mean, log_variance) = (out[..dz].to_vec(), out[dz..].to_vec());
        let sample = match mode {
            EncodeMode::Mean => mean.clone(),
            EncodeMode::Sample => {
                let zero = vec![0.0; dz];
                let eps = noise.unwrap_or(&zero);
                if eps.len() != dz {
                    return Err(Error::DimensionMismatch { context: "latent noise", expected: dz, actual: eps.len() });
                }
                mean.iter()
                    .zip(&log_variance)
                    .zip(eps)
                    .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
                    .collect()
            }
        };
        Ok(LatentState { mean, log_variance, sample })
    }

    /// Batched posterior means for `[batch × N·D]` normalised windows.
    pub fn encode_means(&self, windows: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.networks.encoder.infer(windows)?;
        Ok(out.slice(ndarray::s![.., ..self.latent_dim()]).to_owned())
    }

    fn decoder_input(&self, z: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch { context: "latent", expected: self.latent_dim(), actual: z.len() });
        }
        if action.len() != ACTION_DIM {
            return Err(Error::DimensionMismatch { context: "action", expected: ACTION_DIM, actual: action.len() });
        }
        let mut input = z.to_vec();
        input.extend_from_slice(action);
        Ok(input)
    }

    /// Decoder output in normalised units, `(M+1)·D` values.
    pub fn decode_normalized(&self, z: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        self.networks.decoder.infer_vec(&self.decoder_input(z, action)?)
    }

    /// Predicted states `x̂_k … x̂_{k+M}` in physical units.
    pub fn decode(&self, z: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.decode_normalized(z, action)?;
        self.normalizer.denormalize_in_place(&mut out);
        Ok(out)
    }

    /// Contact probabilities, `J` rows of 4 feet.
    pub fn predict_contacts(&self, z: &[f64]) -> Result<Vec<[f64; CONTACT_FEET]>> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch { context: "latent", expected: self.latent_dim(), actual: z.len() });
        }
        let logits = self.networks.predictor.infer_vec(z)?;
        Ok(logits
            .chunks_exact(CONTACT_FEET)
            .map(|c| [sigmoid(c[0]), sigmoid(c[1]), sigmoid(c[2]), sigmoid(c[3])])
            .collect())
    }

    /// Score of a posterior against observed normalised states
    /// `target` (`x_k … x_{k+M}`): the training reconstruction term for the
    /// mean decode plus `beta` times the KL term.
    pub fn elbo_score(&self, latent: &LatentState, action: &[f64], target: &[f64], beta: f64) -> Result<f64> {
        let pred = self.decode_normalized(&latent.mean, action)?;
        if pred.len() != target.len() {
            return Err(Error::DimensionMismatch { context: "elbo target", expected: pred.len(), actual: target.len() });
        }
        let recon: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
        Ok(crate::vae::loss::reconstruction_scale(&self.config) * recon + beta * latent.kl_divergence())
    }

    pub fn drive_dimension(&self) -> Result<usize> {
        self.drive_dimension.ok_or(Error::DriveUnset)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
