use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_oracle::STATE_DIM;

pub const ACTION_DIM: usize = 3;
pub const CONTACT_FEET: usize = 4;
pub const MIN_LATENT_DIM: usize = 6;

/// Network and windowing dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Encoder window length `N` (states).
    pub window_len: usize,
    /// Future predictions `M`; the decoder emits `M + 1` states.
    pub horizon: usize,
    /// Contact prediction steps `J`.
    pub contact_steps: usize,
    pub latent_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub control_hz: f64,
    pub encoder_hz: f64,
    pub state_dim: usize,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl ModelConfig {
    pub fn desk_scale() -> Self {
        Self {
            window_len: 20,
            horizon: 4,
            contact_steps: 3,
            latent_dim: 8,
            hidden_width: 64,
            hidden_layers: 2,
            control_hz: 100.0,
            encoder_hz: 25.0,
            state_dim: STATE_DIM,
            beta: 1.0,
            gamma: 0.5,
        }
    }

    /// Published network sizes and rates, except that 80 states are sampled at
    /// 100 Hz so the 0.8 s history covers a 0.5 s swing. The state packing
    /// stays at 60 features.
    pub fn full_scale() -> Self {
        Self {
            window_len: 80,
            horizon: 19,
            contact_steps: 3,
            latent_dim: 125,
            hidden_width: 256,
            hidden_layers: 2,
            control_hz: 400.0,
            encoder_hz: 100.0,
            state_dim: STATE_DIM,
            beta: 1.0,
            gamma: 0.5,
        }
    }

    /// Sampling stride `r = f_c / f_enc`.
    pub fn stride(&self) -> usize {
        (self.control_hz / self.encoder_hz).round() as usize
    }

    /// Buffer length needed to build one window: `r·(N−1) + 1`.
    pub fn history_ticks(&self) -> usize {
        self.stride() * (self.window_len - 1) + 1
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_len as f64 / self.encoder_hz
    }

    pub fn encoder_input_dim(&self) -> usize {
        self.window_len * self.state_dim
    }

    pub fn decoder_output_dim(&self) -> usize {
        (self.horizon + 1) * self.state_dim
    }

    pub fn contact_output_dim(&self) -> usize {
        self.contact_steps * CONTACT_FEET
    }

    pub fn encoder_sizes(&self) -> Vec<usize> {
        self.sizes(self.encoder_input_dim(), 2 * self.latent_dim)
    }

    pub fn decoder_sizes(&self) -> Vec<usize> {
        self.sizes(self.latent_dim + ACTION_DIM, self.decoder_output_dim())
    }

    pub fn predictor_sizes(&self) -> Vec<usize> {
        self.sizes(self.latent_dim, self.contact_output_dim())
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        s.push(output);
        s
    }

    /// Structural checks, plus the history-length check when the training swing is known.
    pub fn validate(&self, swing_duration: Option<f64>) -> Result<()> {
        let ratio = self.control_hz / self.encoder_hz;
        if !(self.control_hz > 0.0 && self.encoder_hz > 0.0)
            || ratio < 1.0 - 1e-9
            || (ratio - ratio.round()).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "control rate {} Hz must be an integer multiple of the encoder rate {} Hz",
                self.control_hz, self.encoder_hz
            )));
        }
        if self.window_len < 2 || self.contact_steps < 1 || self.hidden_width == 0 {
            return Err(Error::Config("window_len >= 2, contact_steps >= 1 and hidden_width >= 1 required".into()));
        }
        if self.latent_dim < MIN_LATENT_DIM {
            return Err(Error::Config(format!("latent_dim must be at least {MIN_LATENT_DIM}")));
        }
        if self.state_dim != STATE_DIM {
            return Err(Error::Config(format!("state_dim must be {STATE_DIM}")));
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::Config("beta and gamma must be non-negative".into()));
        }
        if let Some(swing) = swing_duration {
            if self.window_seconds() + 1e-12 < swing {
                return Err(Error::Config(format!(
                    "encoder history of {:.3} s is shorter than the {:.3} s swing",
                    self.window_seconds(),
                    swing
                )));
            }
        }
        Ok(())
    }
}
