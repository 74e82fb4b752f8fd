//! The closed-loop planning step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_oracle::state::{layout, RobotState};
use crate::latent_control::{
    advance_phase, apply_drive, design_butterworth, period_ticks_for_swing, stance_ticks_for_duration, BiquadFilter,
    DriveSignalState,
};
use crate::planner::buffer::{build_window, state_features, StateBuffer};
use crate::planner::monitor::{ElboMonitor, MonitorEvent};
use crate::vae::{kl_divergence, loss::reconstruction_scale, EncodeMode, VaeModel, ACTION_DIM};

/// Joint trajectory with finite-difference derivatives.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JointPlan {
    pub positions: Vec<[f64; 12]>,
    pub velocities: Vec<[f64; 12]>,
    pub accelerations: Vec<[f64; 12]>,
}

/// Central differences inside, first-order one-sided at both ends.
pub fn differentiate<const W: usize>(values: &[[f64; W]], dt: f64) -> Vec<[f64; W]> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = match (i, n) {
                (_, 0 | 1) => (0, 0),
                (0, _) => (0, 1),
                (i, n) if i == n - 1 => (n - 2, n - 1),
                (i, _) => (i - 1, i + 1),
            };
            let span = (hi - lo) as f64 * dt;
            let mut out = [0.0; W];
            if hi > lo {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = (values[hi][j] - values[lo][j]) / span;
                }
            }
            out
        })
        .collect()
}

/// Split a decoded prediction into the joint plan and the base twists.
pub fn extract_plan(prediction: &[f64], state_dim: usize, control_hz: f64) -> Result<(JointPlan, Vec<[f64; 6]>)> {
    if state_dim == 0 || prediction.len() % state_dim != 0 || prediction.len() / state_dim < 3 {
        return Err(Error::DimensionMismatch {
            context: "plan extraction needs at least three predicted states",
            expected: 3 * state_dim,
            actual: prediction.len(),
        });
    }
    let dt = 1.0 / control_hz;
    let rows: Vec<&[f64]> = prediction.chunks_exact(state_dim).collect();
    let positions: Vec<[f64; 12]> = rows
        .iter()
        .map(|r| r[layout::Q..layout::Q + 12].try_into().expect("12 joints"))
        .collect();
    let twists = rows
        .iter()
        .map(|r| r[layout::TWIST..layout::TWIST + 6].try_into().expect("6 twist"))
        .collect();
    let velocities = differentiate(&positions, dt);
    let accelerations = differentiate(&velocities, dt);
    Ok((JointPlan { positions, velocities, accelerations }, twists))
}

/// Output of one planning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTick {
    pub tick: u64,
    /// Denormalised `x̂_k … x̂_{k+M}`, row-major.
    pub prediction: Vec<f64>,
    pub joints: JointPlan,
    pub base_twist: Vec<[f64; 6]>,
    /// `J` rows of per-foot contact probabilities.
    pub contacts: Vec<[f64; 4]>,
    /// Filtered latent fed to the decoder.
    pub latent: Vec<f64>,
    /// Posterior mean of the current window.
    pub encoded: Vec<f64>,
    pub elbo: Option<f64>,
    pub event: Option<MonitorEvent>,
    pub drive: DriveSignalState,
    pub action: [f64; ACTION_DIM],
    pub response_active: bool,
}

impl PlanTick {
    /// Predicted state `step` ticks ahead.
    pub fn predicted_state(&self, step: usize, state_dim: usize) -> &[f64] {
        &self.prediction[step * state_dim..(step + 1) * state_dim]
    }

    /// Stance pattern predicted for the current tick (threshold 0.5).
    pub fn predicted_contact(&self) -> [bool; 4] {
        self.contacts[0].map(|p| p >= 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerOptions {
    pub filter_cutoff_hz: f64,
    /// Drive amplitude in latent units.
    pub amplitude: f64,
    pub swing_s: f64,
    pub full_stance_s: f64,
    pub response_s: f64,
    pub threshold: f64,
    pub auto_response: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            filter_cutoff_hz: 10.0,
            amplitude: 1.0,
            swing_s: 0.5,
            full_stance_s: 0.075,
            response_s: 1.5,
            threshold: f64::INFINITY,
            auto_response: true,
        }
    }
}

#[derive(Debug, Clone)]
struct PastLatent {
    mean: Vec<f64>,
    log_variance: Vec<f64>,
    action: [f64; ACTION_DIM],
}

/// Owns the buffer, drive, filter and monitor of one control loop.
#[derive(Debug, Clone)]
pub struct Planner {
    model: VaeModel,
    drive_dimension: usize,
    buffer: StateBuffer,
    pub drive: DriveSignalState,
    filter: BiquadFilter,
    filter_primed: bool,
    pub monitor: ElboMonitor,
    past: VecDeque<PastLatent>,
    tick: u64,
}

impl Planner {
    pub fn new(model: VaeModel, options: &PlannerOptions) -> Result<Self> {
        model.validate()?;
        let drive_dimension = model.drive_dimension()?;
        let c = &model.config;
        let period = period_ticks_for_swing(options.swing_s, c.control_hz);
        let drive = DriveSignalState::new(
            options.amplitude.max(0.0),
            period,
            stance_ticks_for_duration(options.full_stance_s, c.control_hz),
        );
        let filter = design_butterworth(options.filter_cutoff_hz, c.control_hz, c.latent_dim)?;
        let mut monitor = ElboMonitor::new(options.threshold, period, options.response_s, c.control_hz);
        monitor.auto_response = options.auto_response;
        Ok(Self {
            buffer: StateBuffer::for_config(c, c.horizon),
            drive,
            filter,
            filter_primed: false,
            monitor,
            past: VecDeque::with_capacity(c.horizon + 1),
            tick: 0,
            drive_dimension,
            model,
        })
    }

    pub fn model(&self) -> &VaeModel {
        &self.model
    }

    pub fn buffer(&self) -> &StateBuffer {
        &self.buffer
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn drive_dimension(&self) -> usize {
        self.drive_dimension
    }

    /// Buffer one measured state.
    pub fn observe(&mut self, state: RobotState) {
        self.buffer.push(state);
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.model.config.history_ticks()
    }

    /// Forget filter state; the next tick starts the filter at its input.
    pub fn reset_filter(&mut self) {
        self.filter.reset();
        self.filter_primed = false;
    }

    /// Delayed ELBO: the posterior encoded `M` ticks ago, decoded with the
    /// action of that tick, scored against the states measured since.
    fn delayed_elbo(&self) -> Option<f64> {
        let m = self.model.config.horizon;
        let d = self.model.config.state_dim;
        if self.past.len() < m + 1 || self.buffer.len() < m + 1 {
            return None;
        }
        let old = &self.past[0];
        let pred = self.model.decode_normalized(&old.mean, &old.action).ok()?;
        let mut row = vec![0.0; d];
        let mut sq = 0.0;
        for step in 0..=m {
            let state = self.buffer.back(m - step)?;
            state_features(state, &self.model.normalizer, &mut row);
            sq += pred[step * d..(step + 1) * d].iter().zip(&row).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        }
        Some(reconstruction_scale(&self.model.config) * sq + self.model.config.beta * kl_divergence(&old.mean, &old.log_variance))
    }

    /// One planning step for the newest buffered state.
    pub fn plan_tick(&mut self, action: [f64; ACTION_DIM]) -> Result<PlanTick> {
        let config = &self.model.config;
        let window = build_window(&self.buffer, config, &self.model.normalizer)?;
        let latent = self.model.encode(&window, EncodeMode::Mean, None)?;

        if self.past.len() == config.horizon + 1 {
            self.past.pop_front();
        }
        self.past.push_back(PastLatent {
            mean: latent.mean.clone(),
            log_variance: latent.log_variance.clone(),
            action,
        });
        let elbo = self.delayed_elbo();
        let event = elbo.map(|v| self.monitor.update(v, &mut self.drive));

        self.drive = advance_phase(&self.drive);
        let driven = apply_drive(&latent.mean, &self.drive, self.drive_dimension)?;
        if !self.filter_primed {
            self.filter.prime(&driven);
            self.filter_primed = true;
        }
        let z = self.filter.apply(&driven)?;
        let prediction = self.model.decode(&z, &action)?;
        let contacts = self.model.predict_contacts(&z)?;
        let (joints, base_twist) = extract_plan(&prediction, config.state_dim, config.control_hz)?;
        let tick = PlanTick {
            tick: self.tick,
            prediction,
            joints,
            base_twist,
            contacts,
            latent: z,
            encoded: latent.mean,
            elbo,
            event,
            drive: self.drive,
            action,
            response_active: self.monitor.response_active,
        };
        self.tick += 1;
        Ok(tick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_positions_have_zero_derivatives() {
        let p = vec![[0.3; 12]; 5];
        let v = differentiate(&p, 0.01);
        assert!(v.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn ramp_has_constant_velocity_and_zero_interior_acceleration() {
        let a = 0.7;
        let dt = 0.01;
        let p: Vec<[f64; 1]> = (0..6).map(|i| [a * i as f64 * dt]).collect();
        let v = differentiate(&p, dt);
        assert!(v.iter().all(|x| (x[0] - a).abs() < 1e-12));
        let acc = differentiate(&v, dt);
        assert!(acc[1..5].iter().all(|x| x[0].abs() < 1e-9));
    }

    #[test]
    fn quadratic_central_difference_is_exact_inside() {
        let dt = 0.01;
        let q = |t: f64| 2.0 * t * t - 0.5 * t + 0.1;
        let dq = |t: f64| 4.0 * t - 0.5;
        let p: Vec<[f64; 1]> = (0..5).map(|i| [q(i as f64 * dt)]).collect();
        let v = differentiate(&p, dt);
        for i in 1..4 {
            assert!((v[i][0] - dq(i as f64 * dt)).abs() < 1e-12);
        }
    }

    #[test]
    fn extraction_reads_joint_and_twist_blocks() {
        let d = 60;
        let mut pred = vec![0.0; 5 * d];
        for s in 0..5 {
            pred[s * d + 2] = s as f64;
            pred[s * d + layout::TWIST] = 0.25;
        }
        let (plan, twist) = extract_plan(&pred, d, 100.0).unwrap();
        assert_eq!(plan.positions.len(), 5);
        assert!(plan.velocities.iter().all(|v| (v[2] - 100.0).abs() < 1e-9));
        assert!(twist.iter().all(|t| t[0] == 0.25));
        assert!(extract_plan(&pred[..2 * d], d, 100.0).is_err());
    }
}
