//! Latent-space trot planning for a simulated quadruped.
//!
//! A kinematic oracle synthesises trot data, a variational autoencoder learns
//! to encode state windows and predict future states and foot contacts, and
//! a closed-loop planner generates gait by overwriting one latent dimension
//! with a commandable oscillation.

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod gait_oracle;
pub mod latent_control;
pub mod neural;
pub mod pipeline;
pub mod planner;
#[cfg(feature = "service")]
pub mod service;
pub mod sim;
pub mod vae;

pub use config::RunConfig;
pub use error::{Error, Result};
