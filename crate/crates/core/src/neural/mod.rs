//! Dense networks with ELU activations, exact reverse-mode gradients and Adam.

pub mod adam;
pub mod gradcheck;
pub mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, FlatParams, GradCheckEntry, GradCheckReport};
pub use mlp::{Activation, DenseLayer, Mlp, MlpCache};
