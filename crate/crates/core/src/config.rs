//! Run configuration: one TOML document covering every pipeline stage.
//!
//! A document may name a `preset` (`"desk"`, the default, or `"full"`) and
//! override any subset of its keys; the overrides are merged table by table
//! over the preset before the whole document is validated. Unknown keys are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_oracle::dataset::TwistRange;
use crate::gait_oracle::trot::{GaitParams, OracleOptions, Twist};
use crate::planner::PlannerOptions;
use crate::sim::{EnvelopeTrials, SimOptions};
use crate::vae::{ModelConfig, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Full,
}

/// Size and spread of the synthetic training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataOptions {
    pub trajectories: usize,
    pub duration_s: f64,
    pub twist_range: TwistRange,
}

/// Nominal conditions and trial counts for the disturbance experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOptions {
    pub swing_s: f64,
    pub full_stance_s: f64,
    pub twist: Twist,
    /// Length of the nominal rollout the threshold is calibrated on.
    pub calibration_s: f64,
    pub k_sigma: f64,
    /// Nominal time over which false triggers are counted.
    pub false_trigger_s: f64,
    pub detection_trials: usize,
    /// Push magnitude for the detection trials, m/s.
    pub detection_magnitude: f64,
    pub envelope_magnitudes: Vec<f64>,
    pub envelope: EnvelopeTrials,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            swing_s: 0.25,
            full_stance_s: 0.0625,
            twist: Twist::new(0.2, 0.0, 0.0),
            calibration_s: 30.0,
            k_sigma: crate::planner::DEFAULT_K_SIGMA,
            false_trigger_s: 120.0,
            detection_trials: 50,
            detection_magnitude: 0.5,
            envelope_magnitudes: (0..=12).map(|i| i as f64 / 5.0).collect(),
            envelope: EnvelopeTrials::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceOptions {
    pub bind: String,
    pub port: u16,
    /// Telemetry frames per second sent to each client.
    pub telemetry_hz: f64,
    /// Frames buffered per client before new frames are dropped.
    pub client_queue: usize,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self { bind: "127.0.0.1".into(), port: 8765, telemetry_hz: 20.0, client_queue: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    /// Seed used when a command is not given one explicitly.
    pub seed: u64,
    pub gait: GaitParams,
    pub data: DataOptions,
    pub oracle: OracleOptions,
    pub model: ModelConfig,
    pub training: TrainOptions,
    pub planner: PlannerOptions,
    pub sim: SimOptions,
    pub experiments: ExperimentOptions,
    pub service: ServiceOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Laptop-sized model and corpus.
    pub fn desk() -> Self {
        Self {
            preset: Preset::Desk,
            seed: 0,
            gait: GaitParams::default(),
            data: DataOptions { trajectories: 60, duration_s: 20.0, twist_range: TwistRange::default() },
            oracle: OracleOptions::default(),
            model: ModelConfig::desk_scale(),
            training: TrainOptions::default(),
            planner: PlannerOptions::default(),
            sim: SimOptions::default(),
            experiments: ExperimentOptions::default(),
            service: ServiceOptions::default(),
        }
    }

    /// Published network sizes, rates and hyper-parameters.
    pub fn full() -> Self {
        let model = ModelConfig::full_scale();
        let mut c = Self::desk();
        c.preset = Preset::Full;
        c.oracle.sample_rate = model.control_hz;
        c.model = model;
        c
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self::desk(),
            Preset::Full => Self::full(),
        }
    }

    /// Oracle sampling options with the configured trajectory length.
    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions { duration: self.data.duration_s, ..self.oracle }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let preset = match user.get("preset") {
            None => Preset::Desk,
            Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| Error::Config(format!("preset: {e}")))?,
        };
        let mut merged = toml::Table::try_from(Self::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, user);
        let config: Self = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.gait.validate()?;
        self.data.twist_range.validate()?;
        self.model.validate(Some(self.gait.swing_duration))?;
        self.training.validate()?;
        if self.data.trajectories < 2 || !(self.data.duration_s > 0.0) {
            return Err(Error::Config("data needs at least 2 trajectories and a positive duration".into()));
        }
        if (self.oracle.sample_rate - self.model.control_hz).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "oracle sample rate {} Hz must equal the control rate {} Hz",
                self.oracle.sample_rate, self.model.control_hz
            )));
        }
        let p = &self.planner;
        let nyquist = self.model.control_hz / 2.0;
        if !(p.filter_cutoff_hz > 0.0 && p.filter_cutoff_hz < nyquist) {
            return Err(Error::Config(format!("filter cutoff must lie in (0, {nyquist}) Hz")));
        }
        if !(p.amplitude >= 0.0 && p.swing_s > 0.0 && p.full_stance_s >= 0.0 && p.response_s >= 0.0) {
            return Err(Error::Config("planner needs amplitude >= 0, swing > 0, stance >= 0, response >= 0".into()));
        }
        let s = &self.sim;
        if !(s.tracking_gain > 0.0 && s.tracking_gain <= 1.0) {
            return Err(Error::Config("sim tracking_gain must lie in (0, 1]".into()));
        }
        if !(s.contact_threshold >= 0.0 && s.liftoff_threshold >= s.contact_threshold) {
            return Err(Error::Config("sim needs 0 <= contact_threshold <= liftoff_threshold".into()));
        }
        if !(s.joint_noise_std >= 0.0 && s.twist_noise_std >= 0.0 && s.frame_reset_period > 0.0) {
            return Err(Error::Config("sim noise must be non-negative and frame_reset_period positive".into()));
        }
        let e = &self.experiments;
        if !(e.swing_s > 0.0 && e.full_stance_s >= 0.0 && e.calibration_s > 0.0 && e.k_sigma > 0.0) {
            return Err(Error::Config("experiments need positive swing, calibration time and k_sigma".into()));
        }
        if e.envelope_magnitudes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("envelope_magnitudes must be sorted ascending".into()));
        }
        if !(self.service.telemetry_hz > 0.0 && self.service.telemetry_hz <= self.model.control_hz) {
            return Err(Error::Config("telemetry_hz must lie in (0, control_hz]".into()));
        }
        if self.service.client_queue == 0 {
            return Err(Error::Config("client_queue must be at least 1".into()));
        }
        Ok(())
    }
}

/// Recursively overlay `over` onto `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_desk_preset() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::desk());
    }

    #[test]
    fn full_preset_carries_published_values() {
        let c = RunConfig::from_toml_str("preset = \"full\"").unwrap();
        assert_eq!(c.model.window_len, 80);
        assert_eq!(c.model.horizon, 19);
        assert_eq!(c.model.latent_dim, 125);
        assert_eq!(c.model.beta, 1.0);
        assert_eq!(c.model.gamma, 0.5);
        assert_eq!(c.training.learning_rate, 1e-3);
        assert_eq!(c.gait.swing_duration, 0.5);
        assert_eq!(c.gait.full_stance_duration, 0.075);
        assert_eq!(c.gait.step_height, 0.10);
        assert_eq!(c.planner.filter_cutoff_hz, 10.0);
    }

    #[test]
    fn partial_tables_override_single_keys() {
        let c = RunConfig::from_toml_str("[training]\nsteps = 12\n\n[service]\nport = 9000\n").unwrap();
        assert_eq!(c.training.steps, 12);
        assert_eq!(c.training.batch_size, RunConfig::desk().training.batch_size);
        assert_eq!(c.service.port, 9000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("[training]\nstepz = 12\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("colour = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("[planner]\nfilter_cutoff_hz = 80.0\n").is_err());
        assert!(RunConfig::from_toml_str("[model]\nencoder_hz = 30.0\n").is_err());
        assert!(RunConfig::from_toml_str("preset = \"huge\"").is_err());
    }

    #[test]
    fn printed_config_parses_back() {
        let c = RunConfig::full();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap(), c);
    }
}
