//! Encoder, decoder and contact predictor, their training objective and
//! drive-dimension identification.

pub mod config;
pub mod eval;
pub mod identify;
pub mod loss;
pub mod model;
pub mod normalizer;
pub mod samples;
pub mod train;

pub use config::{ModelConfig, ACTION_DIM, CONTACT_FEET, MIN_LATENT_DIM};
pub use identify::{gait_frequency, identify_drive_dimension, identify_from_traces, spectral_power, DriveIdentification};
pub use loss::{check_loss_gradients, elbo_loss, total_loss, Batch, LossBreakdown};
pub use model::{kl_divergence, EncodeMode, LatentState, VaeModel, VaeNetworks};
pub use normalizer::Normalizer;
pub use samples::{split_trajectories, Corpus, SampleIndex};
pub use train::{train, train_on, TrainOptions, TrainOutcome};
