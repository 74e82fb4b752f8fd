//! Headless closed-loop experiments: the scripted cadence schedule, seeded
//! push trials, nominal false-trigger counting, the recovery envelope and
//! the planning-time budget.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::gait_oracle::Twist;
use crate::latent_control::{period_ticks_for_swing, stance_ticks_for_duration};
use crate::pipeline::nominal_scenario;
use crate::planner::{Calibration, PlannerOptions};
use crate::sim::schedule::{full_support_runs, interior, swing_runs};
use crate::sim::{
    disturbance_envelope, run_rollout, run_rollout_timed, trial_scenario, EnvelopeReport, EnvelopeTrials,
    RolloutReport, Scenario, ScenarioEvent, Termination, TimedEvent,
};
use crate::vae::VaeModel;

/// Largest push latency still counted as detected, seconds.
pub const DETECTION_WINDOW_S: f64 = 0.1;
/// Largest number of swing steps counted as a recovery.
pub const MAX_RECOVERY_STEPS: usize = 5;

/// Cadence timeline: swing 312.5 → 188 → 125 ms at 3 s intervals, then no
/// full support, then standing (zero amplitude and twist), 15 s in all.
pub fn schedule_scenario(config: &RunConfig) -> Scenario {
    let at = |at_s: f64, event: ScenarioEvent| TimedEvent { at_s, event };
    Scenario {
        duration_s: 15.0,
        twist: Twist::new(0.2, 0.0, 0.0),
        swing_s: 0.3125,
        full_stance_s: config.experiments.full_stance_s,
        events: vec![
            at(3.0, ScenarioEvent::SetSwingPeriod { seconds: 0.188 }),
            at(6.0, ScenarioEvent::SetSwingPeriod { seconds: 0.125 }),
            at(9.0, ScenarioEvent::SetStanceDuration { seconds: 0.0 }),
            at(12.0, ScenarioEvent::SetAmplitude { amplitude: 0.0 }),
            at(12.0, ScenarioEvent::SetTwist { vx: 0.0, vy: 0.0, yaw_rate: 0.0 }),
        ],
        ..Scenario::default()
    }
}

/// Measured schedule between two commanded changes, after one gait cycle
/// of settling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub from_tick: usize,
    pub to_tick: usize,
    pub swing_ticks: u32,
    pub stance_ticks: u32,
    /// Interior airborne runs of every leg.
    pub executed_swing: Vec<usize>,
    /// Interior four-foot runs; empty when none occurred.
    pub executed_full_support: Vec<usize>,
    /// Largest deviation of any measured duration from its command.
    pub max_error_ticks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub segments: Vec<ScheduleSegment>,
    /// Four-foot contact on every tick from one cycle after A→0 onwards.
    pub standing: bool,
    pub termination: Termination,
}

impl ScheduleReport {
    pub fn within(&self, ticks: usize) -> bool {
        !self.segments.is_empty() && self.segments.iter().all(|s| s.max_error_ticks <= ticks)
    }
}

fn measure_segment(report: &RolloutReport, from: usize, to: usize) -> ScheduleSegment {
    let period = report.drive_period[from];
    let stance = report.drive_stance[from];
    let cycle = (period + 2 * stance) as usize;
    let start = (from + cycle).min(to);
    let trace = &report.contacts[start..to];
    let swing_ticks = period.div_ceil(2);
    let executed_swing: Vec<usize> =
        (0..4).flat_map(|leg| interior(&swing_runs(trace, leg), trace.len())).map(|r| r.len).collect();
    let executed_full_support: Vec<usize> =
        interior(&full_support_runs(trace), trace.len()).iter().map(|r| r.len).collect();
    let dev = |measured: usize, wanted: u32| measured.abs_diff(wanted as usize);
    let swing_error = executed_swing.iter().map(|&m| dev(m, swing_ticks)).max().unwrap_or(swing_ticks as usize);
    let support_error = if executed_full_support.is_empty() {
        stance as usize
    } else {
        executed_full_support.iter().map(|&m| dev(m, stance)).max().unwrap_or(0)
    };
    ScheduleSegment {
        from_tick: start,
        to_tick: to,
        swing_ticks,
        stance_ticks: stance,
        executed_swing,
        executed_full_support,
        max_error_ticks: swing_error.max(support_error),
    }
}

pub fn schedule_experiment(model: &VaeModel, config: &RunConfig, seed: u64) -> Result<ScheduleReport> {
    let scenario = schedule_scenario(config);
    let report = run_rollout(model, &config.planner, &config.sim, &scenario, seed)?;
    let hz = report.control_hz;
    let mut changes: Vec<usize> = scenario.events.iter().map(|e| (e.at_s * hz).round() as usize).collect();
    changes.dedup();
    let n = report.len();
    let mut bounds = vec![0];
    bounds.extend(changes.iter().copied().filter(|&c| c < n));
    let stand_from = bounds.pop().unwrap_or(n);
    bounds.push(stand_from);
    let segments = bounds.windows(2).map(|w| measure_segment(&report, w[0], w[1])).collect();
    let settle = stand_from + period_ticks_for_swing(scenario.swing_s, hz) as usize
        + 2 * stance_ticks_for_duration(scenario.full_stance_s, hz) as usize;
    let standing = report.termination == Termination::Completed
        && settle < n
        && report.contacts[settle..].iter().all(|c| c.iter().all(|&f| f));
    Ok(ScheduleReport { segments, standing, termination: report.termination })
}

/// Seeded push trials scored for detection latency and recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub calibration: Calibration,
    pub magnitude: f64,
    pub latencies_s: Vec<Option<f64>>,
    pub recovery_steps: Vec<Option<usize>>,
    pub fell: usize,
    /// Rising edges of the monitor above θ during the nominal run.
    pub false_triggers: usize,
    pub nominal_s: f64,
}

impl DetectionReport {
    pub fn trials(&self) -> usize {
        self.latencies_s.len()
    }

    pub fn detected(&self) -> usize {
        self.latencies_s.iter().filter(|l| l.is_some_and(|l| l <= DETECTION_WINDOW_S + 1e-9)).count()
    }

    pub fn detection_rate(&self) -> f64 {
        self.detected() as f64 / self.trials().max(1) as f64
    }

    /// False triggers per second of nominal walking.
    pub fn false_trigger_rate(&self) -> f64 {
        self.false_triggers as f64 / self.nominal_s
    }

    pub fn recovered_within(&self, steps: usize) -> usize {
        self.recovery_steps.iter().filter(|s| s.is_some_and(|s| s <= steps)).count()
    }

    pub fn max_recovery_steps(&self) -> Option<usize> {
        self.recovery_steps.iter().flatten().copied().max()
    }
}

fn rising_edges(report: &RolloutReport) -> usize {
    let above: Vec<bool> = report.elbo.iter().map(|v| v.is_some_and(|v| v > report.threshold)).collect();
    above.windows(2).filter(|w| !w[0] && w[1]).count() + usize::from(above.first() == Some(&true))
}

/// Push trials at the configured magnitude with the response enabled, plus
/// a long nominal run for false triggers. `options` must carry θ.
pub fn detection_experiment(
    model: &VaeModel,
    config: &RunConfig,
    options: &PlannerOptions,
    calibration: Calibration,
    seed: u64,
) -> Result<DetectionReport> {
    let e = &config.experiments;
    let base = nominal_scenario(config, e.envelope.settle_s);
    let trials = EnvelopeTrials { trials: e.detection_trials, ..e.envelope };
    let mut latencies_s = Vec::with_capacity(trials.trials);
    let mut recovery_steps = Vec::with_capacity(trials.trials);
    let mut fell = 0;
    for i in 0..trials.trials {
        let scenario = trial_scenario(&base, &trials, e.detection_magnitude, seed, i);
        let report = run_rollout(model, options, &config.sim, &scenario, seed.wrapping_add(i as u64))?;
        let outcome = &report.disturbances[0];
        latencies_s.push(outcome.detection_latency_s);
        recovery_steps.push(outcome.recovery_steps);
        fell += usize::from(report.fell());
    }
    let nominal = run_rollout(model, options, &config.sim, &nominal_scenario(config, e.false_trigger_s), seed)?;
    Ok(DetectionReport {
        calibration,
        magnitude: e.detection_magnitude,
        latencies_s,
        recovery_steps,
        fell,
        false_triggers: rising_edges(&nominal),
        nominal_s: nominal.len() as f64 / nominal.control_hz,
    })
}

/// Recovery envelopes with and without the cadence response over identical pushes.
pub fn envelope_experiment(
    model: &VaeModel,
    config: &RunConfig,
    options: &PlannerOptions,
    seed: u64,
) -> Result<[EnvelopeReport; 2]> {
    let e = &config.experiments;
    let base = nominal_scenario(config, e.envelope.settle_s);
    let run = |with_response| {
        disturbance_envelope(model, options, &config.sim, &base, &e.envelope_magnitudes, with_response, &e.envelope, seed)
    };
    Ok([run(true)?, run(false)?])
}

/// Mean and worst planning time per tick over a nominal rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub ticks: usize,
    pub mean_s: f64,
    pub max_s: f64,
    pub period_s: f64,
}

pub fn loop_budget(model: &VaeModel, config: &RunConfig, duration_s: f64, seed: u64) -> Result<BudgetReport> {
    let scenario = nominal_scenario(config, duration_s);
    let (report, timing) = run_rollout_timed(model, &config.planner, &config.sim, &scenario, seed)?;
    Ok(BudgetReport {
        ticks: report.len(),
        mean_s: timing.mean(),
        max_s: timing.plan_seconds.iter().copied().fold(0.0, f64::max),
        period_s: 1.0 / report.control_hz,
    })
}
