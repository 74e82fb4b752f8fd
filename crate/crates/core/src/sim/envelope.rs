//! Monte-Carlo disturbance-rejection envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::PlannerOptions;
use crate::sim::rollout::{run_rollout, Scenario, ScenarioEvent, TimedEvent};
use crate::sim::state::SimOptions;
use crate::vae::VaeModel;

/// Fraction of trials that must recover for a magnitude to count.
pub const ENVELOPE_QUANTILE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeTrials {
    pub trials: usize,
    /// Impulse onset drawn uniformly from this interval, seconds.
    pub onset_s: [f64; 2],
    pub decay_s: f64,
    /// Time simulated after the latest possible onset.
    pub settle_s: f64,
}

impl Default for EnvelopeTrials {
    fn default() -> Self {
        Self { trials: 20, onset_s: [2.0, 3.0], decay_s: 0.2, settle_s: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub magnitude: f64,
    pub recovered: usize,
    pub fell: usize,
    pub trials: usize,
}

impl EnvelopePoint {
    pub fn fraction(&self) -> f64 {
        self.recovered as f64 / self.trials.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub with_response: bool,
    pub points: Vec<EnvelopePoint>,
    /// Largest magnitude whose recovery fraction reaches the quantile.
    pub envelope: Option<f64>,
}

/// Trial `i` of a sweep: impulse direction and onset depend only on `(seed, i)`,
/// so runs with and without the response see identical pushes.
pub fn trial_scenario(base: &Scenario, trials: &EnvelopeTrials, magnitude: f64, seed: u64, i: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let onset = if trials.onset_s[1] > trials.onset_s[0] {
        rng.random_range(trials.onset_s[0]..trials.onset_s[1])
    } else {
        trials.onset_s[0]
    };
    let mut scenario = base.clone();
    scenario.duration_s = trials.onset_s[1].max(trials.onset_s[0]) + trials.settle_s;
    scenario.events.push(TimedEvent {
        at_s: onset,
        event: ScenarioEvent::Impulse {
            vx: magnitude * angle.cos(),
            vy: magnitude * angle.sin(),
            yaw_rate: 0.0,
            decay_s: trials.decay_s,
        },
    });
    scenario
}

#[allow(clippy::too_many_arguments)]
pub fn disturbance_envelope(
    model: &VaeModel,
    planner: &PlannerOptions,
    sim: &SimOptions,
    base: &Scenario,
    magnitudes: &[f64],
    with_response: bool,
    trials: &EnvelopeTrials,
    seed: u64,
) -> Result<EnvelopeReport> {
    if magnitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("envelope magnitudes must be sorted ascending".into()));
    }
    let base = Scenario { auto_response: with_response, ..base.clone() };
    let mut points = Vec::with_capacity(magnitudes.len());
    for &magnitude in magnitudes {
        let mut point = EnvelopePoint { magnitude, recovered: 0, fell: 0, trials: trials.trials };
        for i in 0..trials.trials {
            let scenario = trial_scenario(&base, trials, magnitude, seed, i);
            let report = run_rollout(model, planner, sim, &scenario, seed.wrapping_add(i as u64))?;
            let outcome = report.disturbances.first();
            if report.fell() {
                point.fell += 1;
            } else if outcome.is_some_and(|o| o.recovery_s.is_some()) {
                point.recovered += 1;
            }
        }
        points.push(point);
    }
    let envelope = points.iter().filter(|p| p.fraction() >= ENVELOPE_QUANTILE).map(|p| p.magnitude).reduce(f64::max);
    Ok(EnvelopeReport { with_response, points, envelope })
}
