//! JSON checkpoints.
//!
//! Every float is written with the shortest representation that parses back
//! to the same `f64`, so a saved model reloads bit-for-bit. Weights are
//! stored row-major `[outputs × inputs]`.
//!
//! ```json
//! {
//!   "format": "gaitspace-checkpoint",
//!   "version": 1,
//!   "config": { "window_len": 20, ... },
//!   "networks": {
//!     "encoder": { "activations": ["elu", "elu", "identity"],
//!                  "layers": [{ "inputs": 1200, "outputs": 64,
//!                               "weights": [...], "bias": [...] }, ...] },
//!     "decoder": { ... },
//!     "predictor": { ... }
//!   },
//!   "normalization": { "mean": [...], "std": [...] },
//!   "drive_dimension": 3,
//!   "training": { "seed": 7, "steps": 5000, "final_total": 12.3, ... }
//! }
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Activation, DenseLayer, Mlp};
use crate::vae::{ModelConfig, Normalizer, VaeModel, VaeNetworks};

pub const FORMAT_TAG: &str = "gaitspace-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub steps: usize,
    pub final_total: f64,
    pub final_reconstruction: f64,
    pub final_kl: f64,
    pub final_bce: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: VaeModel,
    pub training: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    activations: Vec<Activation>,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct NetworksDoc {
    encoder: NetworkDoc,
    decoder: NetworkDoc,
    predictor: NetworkDoc,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format: String,
    version: u32,
    config: ModelConfig,
    networks: NetworksDoc,
    normalization: Normalizer,
    drive_dimension: Option<usize>,
    training: TrainingMetadata,
}

fn network_doc(mlp: &Mlp) -> NetworkDoc {
    NetworkDoc {
        activations: mlp.activations.clone(),
        layers: mlp
            .layers
            .iter()
            .map(|l| LayerDoc {
                inputs: l.inputs(),
                outputs: l.outputs(),
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect(),
    }
}

fn network_from_doc(name: &str, doc: NetworkDoc) -> Result<Mlp> {
    let layers = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::ShapeMismatch(format!(
                    "{name} layer {i}: {}×{} needs {} weights and {} biases, found {} and {}",
                    l.outputs,
                    l.inputs,
                    l.inputs * l.outputs,
                    l.outputs,
                    l.weights.len(),
                    l.bias.len()
                )));
            }
            Ok(DenseLayer {
                weights: Array2::from_shape_vec((l.outputs, l.inputs), l.weights).expect("length checked"),
                bias: Array1::from(l.bias),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::from_layers(layers, doc.activations).map_err(|e| Error::ShapeMismatch(format!("{name}: {e}")))
}

impl Checkpoint {
    pub fn new(model: VaeModel, training: TrainingMetadata) -> Self {
        Self { model, training }
    }

    pub fn to_json(&self) -> String {
        let m = &self.model;
        let doc = CheckpointDoc {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            config: m.config.clone(),
            networks: NetworksDoc {
                encoder: network_doc(&m.networks.encoder),
                decoder: network_doc(&m.networks.decoder),
                predictor: network_doc(&m.networks.predictor),
            },
            normalization: m.normalizer.clone(),
            drive_dimension: m.drive_dimension,
            training: self.training.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            match msg.strip_prefix("missing field `") {
                Some(rest) => Error::MissingField(rest.split('`').next().unwrap_or(rest).to_string()),
                None => Error::CorruptHeader(msg),
            }
        })?;
        if doc.format != FORMAT_TAG {
            return Err(Error::CorruptHeader(format!("unexpected format tag {:?}", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::CorruptHeader(format!("unsupported checkpoint version {}", doc.version)));
        }
        let networks = VaeNetworks {
            encoder: network_from_doc("encoder", doc.networks.encoder)?,
            decoder: network_from_doc("decoder", doc.networks.decoder)?,
            predictor: network_from_doc("predictor", doc.networks.predictor)?,
        };
        let model = VaeModel {
            config: doc.config,
            networks,
            normalizer: doc.normalization,
            drive_dimension: doc.drive_dimension,
        };
        model.validate().map_err(|e| match e {
            Error::ShapeMismatch(_) => e,
            other => Error::ShapeMismatch(other.to_string()),
        })?;
        Ok(Self { model, training: doc.training })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}

/// Write any serialisable report as pretty JSON.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::EncodeMode;

    fn tiny_model() -> VaeModel {
        let cfg = ModelConfig { hidden_width: 5, ..ModelConfig::desk_scale() };
        let norm = Normalizer { mean: (0..60).map(|i| i as f64 * 0.1).collect(), std: vec![0.5; 60] };
        let mut m = VaeModel::new(cfg, norm, 9).unwrap();
        m.drive_dimension = Some(2);
        m
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = tiny_model();
        let ck = Checkpoint::new(m.clone(), TrainingMetadata { seed: 9, steps: 1, ..Default::default() });
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        let probe: Vec<f64> = (0..m.config.encoder_input_dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = m.encode(&probe, EncodeMode::Mean, None).unwrap();
        let b = back.model.encode(&probe, EncodeMode::Mean, None).unwrap();
        assert_eq!(a.mean.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.mean.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn edited_latent_dim_is_shape_mismatch() {
        let ck = Checkpoint::new(tiny_model(), TrainingMetadata::default());
        let mut v: serde_json::Value = serde_json::from_str(&ck.to_json()).unwrap();
        v["config"]["latent_dim"] = 9.into();
        assert!(matches!(Checkpoint::from_json(&v.to_string()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn truncated_weights_are_shape_mismatch() {
        let ck = Checkpoint::new(tiny_model(), TrainingMetadata::default());
        let mut v: serde_json::Value = serde_json::from_str(&ck.to_json()).unwrap();
        v["networks"]["decoder"]["layers"][1]["weights"].as_array_mut().unwrap().pop();
        assert!(matches!(Checkpoint::from_json(&v.to_string()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn missing_field_is_reported_by_name() {
        let ck = Checkpoint::new(tiny_model(), TrainingMetadata::default());
        let mut v: serde_json::Value = serde_json::from_str(&ck.to_json()).unwrap();
        v.as_object_mut().unwrap().remove("normalization");
        match Checkpoint::from_json(&v.to_string()) {
            Err(Error::MissingField(f)) => assert_eq!(f, "normalization"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_is_an_error_not_a_panic() {
        for text in ["", "{", "[]", "{\"format\":1}", "null"] {
            assert!(Checkpoint::from_json(text).is_err());
        }
    }
}
