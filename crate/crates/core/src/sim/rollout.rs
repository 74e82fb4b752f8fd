//! Scripted closed-loop rollouts.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_oracle::trot::{generate_trot_at, GaitParams, OracleOptions, PlanarPose, Twist};
use crate::latent_control::{period_ticks_for_swing, stance_ticks_for_duration};
use crate::planner::{Planner, PlannerOptions};
use crate::sim::schedule::steps_between;
use crate::sim::state::{step_sim, Disturbance, SimOptions, SimState};
use crate::vae::VaeModel;

/// How the encoder history is filled before closed-loop control starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Warmup {
    /// Motionless standing on neutral footholds.
    Standing,
    /// Oracle trot at the scenario's initial gait, ending `cycle_time_s`
    /// seconds into the gait cycle.
    Oracle { cycle_time_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioEvent {
    /// Drive amplitude, latent units.
    SetAmplitude { amplitude: f64 },
    SetSwingPeriod { seconds: f64 },
    SetStanceDuration { seconds: f64 },
    SetTwist { vx: f64, vy: f64, yaw_rate: f64 },
    Impulse { vx: f64, vy: f64, yaw_rate: f64, decay_s: f64 },
    SetAutoResponse { enabled: bool },
}

/// Unknown keys are still rejected by the flattened event; serde cannot
/// combine `deny_unknown_fields` with `flatten` on this struct itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub at_s: f64,
    #[serde(flatten)]
    pub event: ScenarioEvent,
}

/// Declarative timeline for one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub duration_s: f64,
    pub twist: Twist,
    pub swing_s: f64,
    pub full_stance_s: f64,
    /// Initial drive amplitude in latent units; the planner option if absent.
    pub amplitude: Option<f64>,
    pub auto_response: bool,
    pub warmup: Warmup,
    pub events: Vec<TimedEvent>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            twist: Twist::default(),
            swing_s: 0.5,
            full_stance_s: 0.075,
            amplitude: None,
            auto_response: true,
            warmup: Warmup::Oracle { cycle_time_s: 0.0 },
            events: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.swing_s > 0.0 && self.full_stance_s >= 0.0 && self.amplitude.is_none_or(|a| a >= 0.0)) {
            return Err(Error::Config("scenario needs positive duration and swing, non-negative stance and amplitude".into()));
        }
        if self.events.iter().any(|e| !(e.at_s >= 0.0)) {
            return Err(Error::Config("scenario event times must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Fell { tick: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceOutcome {
    pub onset_tick: usize,
    pub impulse: [f64; 3],
    pub detection_latency_s: Option<f64>,
    /// Start of the first calm window of the required length after onset.
    pub recovery_s: Option<f64>,
    pub recovery_steps: Option<usize>,
}

/// Everything recorded during a rollout; traces share one index per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub control_hz: f64,
    pub threshold: f64,
    pub elbo: Vec<Option<f64>>,
    pub contacts: Vec<[bool; 4]>,
    pub predicted_contacts: Vec<[bool; 4]>,
    pub foot_heights: Vec<[f64; 4]>,
    pub drive_period: Vec<u32>,
    pub drive_stance: Vec<u32>,
    pub drive_amplitude: Vec<f64>,
    pub drive_phase: Vec<f64>,
    pub response_active: Vec<bool>,
    pub base_pose: Vec<PlanarPose>,
    pub commanded_twist: Vec<[f64; 3]>,
    pub disturbances: Vec<DisturbanceOutcome>,
    pub max_tracking_error: f64,
    pub termination: Termination,
}

impl RolloutReport {
    pub fn len(&self) -> usize {
        self.elbo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elbo.is_empty()
    }

    pub fn fell(&self) -> bool {
        matches!(self.termination, Termination::Fell { .. })
    }

    /// Ticks whose ELBO exceeds the threshold.
    pub fn exceedances(&self) -> usize {
        self.elbo.iter().filter(|v| v.is_some_and(|v| v > self.threshold)).count()
    }
}

/// Wall-clock cost of every planning step, seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutTiming {
    pub plan_seconds: Vec<f64>,
}

impl RolloutTiming {
    pub fn mean(&self) -> f64 {
        self.plan_seconds.iter().sum::<f64>() / self.plan_seconds.len().max(1) as f64
    }
}

/// Calm time after a disturbance that counts as recovered.
pub const RECOVERY_CALM_S: f64 = 0.5;

/// Planner plus simulator ready to run from the end of warm-up.
pub struct ClosedLoop {
    pub planner: Planner,
    pub sim: SimState,
    pub sim_options: SimOptions,
    pub twist: Twist,
    pub disturbances: Vec<Disturbance>,
    rng: ChaCha8Rng,
}

impl ClosedLoop {
    pub fn new(
        model: &VaeModel,
        planner_options: &PlannerOptions,
        sim_options: &SimOptions,
        scenario: &Scenario,
        seed: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        let hz = model.config.control_hz;
        let options = PlannerOptions {
            amplitude: scenario.amplitude.unwrap_or(planner_options.amplitude),
            swing_s: scenario.swing_s,
            full_stance_s: scenario.full_stance_s,
            auto_response: scenario.auto_response,
            ..planner_options.clone()
        };
        let mut planner = Planner::new(model.clone(), &options)?;
        let warm = model.config.history_ticks() + model.config.horizon;
        let sim = match scenario.warmup {
            Warmup::Standing => {
                let mut sim = SimState::standing(sim_options);
                let frame_ticks = (sim_options.frame_reset_period * hz).round() as u64;
                sim.set_frame(PlanarPose::default(), frame_ticks);
                let state = sim.measure(sim_options, [0.0; 2], None);
                for _ in 0..warm {
                    planner.observe(state);
                }
                sim
            }
            Warmup::Oracle { cycle_time_s } => {
                let params = GaitParams {
                    swing_duration: scenario.swing_s,
                    full_stance_duration: scenario.full_stance_s,
                    base_twist_cmd: scenario.twist,
                    ..GaitParams::default()
                };
                let oracle = OracleOptions {
                    duration: (warm as f64 + 0.5) / hz,
                    sample_rate: hz,
                    frame_reset_period: sim_options.frame_reset_period,
                };
                let span = (warm - 1) as f64 / hz;
                let traj = generate_trot_at(&params, &sim_options.geometry, &oracle, cycle_time_s - span, 0.0)?;
                for s in &traj.states {
                    planner.observe(*s);
                }
                let last = traj.states.last().expect("non-empty warm-up");
                let pose = *traj.base_world.last().expect("non-empty warm-up");
                let mut sim = SimState::from_joints(last.q, pose, scenario.twist, sim_options);
                let frame_ticks = (sim_options.frame_reset_period * hz).round() as u64;
                let frame_start = ((warm - 1) as u64 / frame_ticks) * frame_ticks;
                let frame = traj.base_world[frame_start as usize];
                sim.set_frame(frame, frame_start + frame_ticks - (warm - 1) as u64);
                sim
            }
        };
        Ok(Self {
            planner,
            sim,
            sim_options: sim_options.clone(),
            twist: scenario.twist,
            disturbances: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn apply(&mut self, event: &ScenarioEvent) {
        let hz = self.planner.model().config.control_hz;
        let p = &mut self.planner;
        match *event {
            ScenarioEvent::SetAmplitude { amplitude } => p.drive.set_amplitude(amplitude.max(0.0)),
            ScenarioEvent::SetSwingPeriod { seconds } => {
                let t = period_ticks_for_swing(seconds, hz);
                p.monitor.set_nominal_period(t, &mut p.drive);
            }
            ScenarioEvent::SetStanceDuration { seconds } => p.drive.set_stance_ticks(stance_ticks_for_duration(seconds, hz)),
            ScenarioEvent::SetTwist { vx, vy, yaw_rate } => self.twist = Twist::new(vx, vy, yaw_rate),
            ScenarioEvent::Impulse { vx, vy, yaw_rate, decay_s } => self.disturbances.push(Disturbance {
                onset_tick: self.sim.tick + 1,
                impulse: [vx, vy, yaw_rate],
                decay_s,
            }),
            ScenarioEvent::SetAutoResponse { enabled } => p.monitor.set_auto_response(enabled, &mut p.drive),
        }
    }

    /// Plan, step the simulator and buffer the measurement.
    pub fn step(&mut self) -> Result<crate::planner::PlanTick> {
        let tick = self.planner.tick();
        let plan = self.planner.plan_tick(self.twist.as_array()).map_err(|e| match e {
            Error::InsufficientHistory { .. } => Error::PlannerStall { tick, source: Box::new(e) },
            other => other,
        })?;
        let hz = self.planner.model().config.control_hz;
        let noisy = self.sim_options.joint_noise_std > 0.0 || self.sim_options.twist_noise_std > 0.0;
        let rng = if noisy { Some(&mut self.rng) } else { None };
        let measured = step_sim(&mut self.sim, &plan, &self.disturbances, &self.sim_options, hz, rng);
        self.planner.observe(measured);
        Ok(plan)
    }
}

/// Run `scenario` in closed loop and score it.
pub fn run_rollout(
    model: &VaeModel,
    planner_options: &PlannerOptions,
    sim_options: &SimOptions,
    scenario: &Scenario,
    seed: u64,
) -> Result<RolloutReport> {
    run_rollout_timed(model, planner_options, sim_options, scenario, seed).map(|(r, _)| r)
}

pub fn run_rollout_timed(
    model: &VaeModel,
    planner_options: &PlannerOptions,
    sim_options: &SimOptions,
    scenario: &Scenario,
    seed: u64,
) -> Result<(RolloutReport, RolloutTiming)> {
    let mut lp = ClosedLoop::new(model, planner_options, sim_options, scenario, seed)?;
    let hz = model.config.control_hz;
    let ticks = (scenario.duration_s * hz).round() as usize;
    let mut events: Vec<(usize, &ScenarioEvent)> =
        scenario.events.iter().map(|e| ((e.at_s * hz).round() as usize, &e.event)).collect();
    events.sort_by_key(|(t, _)| *t);
    let mut next_event = 0;

    let mut report = RolloutReport {
        control_hz: hz,
        threshold: lp.planner.monitor.threshold,
        elbo: Vec::with_capacity(ticks),
        contacts: Vec::with_capacity(ticks),
        predicted_contacts: Vec::with_capacity(ticks),
        foot_heights: Vec::with_capacity(ticks),
        drive_period: Vec::with_capacity(ticks),
        drive_stance: Vec::with_capacity(ticks),
        drive_amplitude: Vec::with_capacity(ticks),
        drive_phase: Vec::with_capacity(ticks),
        response_active: Vec::with_capacity(ticks),
        base_pose: Vec::with_capacity(ticks),
        commanded_twist: Vec::with_capacity(ticks),
        disturbances: Vec::new(),
        max_tracking_error: 0.0,
        termination: Termination::Completed,
    };
    let mut timing = RolloutTiming { plan_seconds: Vec::with_capacity(ticks) };
    let mut onsets = Vec::new();

    for k in 0..ticks {
        while next_event < events.len() && events[next_event].0 <= k {
            let ev = events[next_event].1;
            if let ScenarioEvent::Impulse { vx, vy, yaw_rate, .. } = ev {
                onsets.push((k, [*vx, *vy, *yaw_rate]));
            }
            lp.apply(ev);
            next_event += 1;
        }
        let start = Instant::now();
        let plan = lp.step()?;
        timing.plan_seconds.push(start.elapsed().as_secs_f64());
        report.elbo.push(plan.elbo);
        report.predicted_contacts.push(plan.predicted_contact());
        report.drive_period.push(plan.drive.period_ticks);
        report.drive_stance.push(plan.drive.stance_ticks);
        report.drive_amplitude.push(plan.drive.amplitude);
        report.drive_phase.push(plan.drive.phase());
        report.response_active.push(plan.response_active);
        report.commanded_twist.push(plan.action);
        report.contacts.push(lp.sim.contact);
        report.foot_heights.push(lp.sim.foot_heights);
        report.base_pose.push(lp.sim.pose);
        report.max_tracking_error = report.max_tracking_error.max(lp.sim.slip);
        if lp.sim.fallen {
            report.termination = Termination::Fell { tick: k };
            break;
        }
    }
    report.disturbances = onsets
        .into_iter()
        .map(|(onset, impulse)| score_disturbance(&report, onset, impulse))
        .collect();
    Ok((report, timing))
}

fn score_disturbance(report: &RolloutReport, onset: usize, impulse: [f64; 3]) -> DisturbanceOutcome {
    let hz = report.control_hz;
    let above = |i: usize| report.elbo[i].is_some_and(|v| v > report.threshold);
    let detection = (onset..report.len()).find(|&i| above(i));
    let calm = (RECOVERY_CALM_S * hz).round() as usize;
    let mut recovery = None;
    if !report.fell() {
        let mut run = 0usize;
        for i in detection.unwrap_or(onset)..report.len() {
            if above(i) || report.elbo[i].is_none() {
                run = 0;
            } else {
                run += 1;
                if run == calm {
                    recovery = Some(i + 1 - calm);
                    break;
                }
            }
        }
    }
    DisturbanceOutcome {
        onset_tick: onset,
        impulse,
        detection_latency_s: detection.map(|d| (d - onset) as f64 / hz),
        recovery_s: recovery.map(|r| (r - onset) as f64 / hz),
        recovery_steps: recovery.map(|r| steps_between(&report.contacts, onset, r)),
    }
}

/// Threshold calibration on a nominal rollout of `scenario` (no disturbances,
/// response off), `k_sigma` standard deviations above the mean ELBO.
pub fn calibrate_nominal(
    model: &VaeModel,
    planner_options: &PlannerOptions,
    sim_options: &SimOptions,
    scenario: &Scenario,
    k_sigma: f64,
    seed: u64,
) -> Result<crate::planner::Calibration> {
    let nominal = Scenario { auto_response: false, events: Vec::new(), ..scenario.clone() };
    let report = run_rollout(model, planner_options, sim_options, &nominal, seed)?;
    if let Termination::Fell { tick } = report.termination {
        return Err(Error::Config(format!("nominal calibration rollout fell at tick {tick}")));
    }
    let trace: Vec<f64> = report.elbo.iter().flatten().copied().collect();
    if trace.is_empty() {
        return Err(Error::Config("nominal calibration rollout produced no ELBO values".into()));
    }
    Ok(crate::planner::calibrate_threshold(&trace, k_sigma))
}
