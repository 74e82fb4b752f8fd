//! Fixed-rate session loop: the single owner of planner and simulator state.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender, TryRecvError, TrySendError};

use crate::error::Result;
use crate::planner::PlannerOptions;
use crate::service::wire::{
    encode, CommandLimits, DriveSnapshot, OperatorCommand, ServerMessage, TelemetryFrame, WirePose, WireTwist,
};
use crate::sim::{ClosedLoop, Scenario, SimOptions};
use crate::vae::VaeModel;

/// Planner plus simulator driven one tick at a time by operator commands.
pub struct Session {
    model: VaeModel,
    planner_options: PlannerOptions,
    sim_options: SimOptions,
    scenario: Scenario,
    seed: u64,
    limits: CommandLimits,
    inner: ClosedLoop,
    tick: u64,
    seen_impulses: Vec<u64>,
}

impl Session {
    pub fn new(
        model: VaeModel,
        planner_options: PlannerOptions,
        sim_options: SimOptions,
        scenario: Scenario,
        seed: u64,
    ) -> Result<Self> {
        let inner = ClosedLoop::new(&model, &planner_options, &sim_options, &scenario, seed)?;
        let limits = CommandLimits::for_rate(model.config.control_hz);
        Ok(Self {
            model,
            planner_options,
            sim_options,
            scenario,
            seed,
            limits,
            inner,
            tick: 0,
            seen_impulses: Vec::new(),
        })
    }

    pub fn control_hz(&self) -> f64 {
        self.model.config.control_hz
    }

    pub fn limits(&self) -> &CommandLimits {
        &self.limits
    }

    /// Ticks executed since the session started; survives `reset`.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn closed_loop(&self) -> &ClosedLoop {
        &self.inner
    }

    /// Clamp and apply one command; it shapes the next call to [`Session::step`].
    pub fn apply(&mut self, command: &OperatorCommand) -> Result<()> {
        let command = command.clamped(&self.limits);
        if let OperatorCommand::InjectImpulse { id: Some(id), .. } = command {
            if self.seen_impulses.contains(&id) {
                return Ok(());
            }
            self.seen_impulses.push(id);
        }
        match command.to_event() {
            Some(event) => self.inner.apply(&event),
            None => {
                self.inner =
                    ClosedLoop::new(&self.model, &self.planner_options, &self.sim_options, &self.scenario, self.seed)?;
            }
        }
        Ok(())
    }

    /// Plan, step the simulator and describe the result.
    pub fn step(&mut self) -> Result<TelemetryFrame> {
        let plan = self.inner.step()?;
        let hz = self.control_hz();
        let monitor = &self.inner.planner.monitor;
        let sim = &self.inner.sim;
        let frame = TelemetryFrame {
            tick: self.tick,
            time_s: self.tick as f64 / hz,
            drive: DriveSnapshot {
                amplitude: plan.drive.amplitude,
                swing_period_s: plan.drive.period_ticks as f64 / (2.0 * hz),
                stance_duration_s: plan.drive.stance_ticks as f64 / hz,
                phase: plan.drive.wrapped_phase(),
                period_ticks: plan.drive.period_ticks,
                stance_ticks: plan.drive.stance_ticks,
            },
            twist: WireTwist { vx: plan.action[0], vy: plan.action[1], yaw_rate: plan.action[2] },
            contact_probabilities: plan.contacts.clone(),
            contacts: sim.contact,
            elbo: plan.elbo.filter(|v| v.is_finite()),
            threshold: Some(monitor.threshold).filter(|t| t.is_finite()),
            response_active: plan.response_active,
            auto_response: monitor.auto_response,
            base_pose: WirePose { x: sim.pose.x, y: sim.pose.y, yaw: sim.pose.yaw },
            joint_positions: sim.q,
            foot_heights: sim.foot_heights,
            fallen: sim.fallen,
        };
        self.tick += 1;
        Ok(frame)
    }
}

/// Fan-out of encoded messages to per-client bounded queues.
///
/// A full queue drops the message for that client only; a client whose
/// receiver is gone is forgotten.
#[derive(Debug, Default)]
pub struct TelemetryHub {
    clients: Mutex<Vec<Sender<Arc<str>>>>,
    capacity: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PublishStats {
    pub delivered: usize,
    pub dropped: usize,
}

impl TelemetryHub {
    pub fn new(capacity: usize) -> Self {
        Self { clients: Mutex::new(Vec::new()), capacity: capacity.max(1) }
    }

    pub fn subscribe(&self) -> Receiver<Arc<str>> {
        let (tx, rx) = crossbeam_channel::bounded(self.capacity);
        self.clients.lock().expect("hub lock").push(tx);
        rx
    }

    pub fn client_count(&self) -> usize {
        self.clients.lock().expect("hub lock").len()
    }

    pub fn publish(&self, message: Arc<str>) -> PublishStats {
        let mut stats = PublishStats::default();
        self.clients.lock().expect("hub lock").retain(|tx| match tx.try_send(message.clone()) {
            Ok(()) => {
                stats.delivered += 1;
                true
            }
            Err(TrySendError::Full(_)) => {
                stats.dropped += 1;
                true
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
        stats
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    /// Publish every `telemetry_every`-th frame.
    pub telemetry_every: u64,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl LoopOptions {
    pub fn decimated(control_hz: f64, telemetry_hz: f64) -> Self {
        Self { telemetry_every: ((control_hz / telemetry_hz).round() as u64).max(1), max_ticks: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoopSummary {
    pub ticks: u64,
    /// Ticks that started more than one period after their deadline.
    pub overruns: u64,
    pub max_lateness_s: f64,
    pub published: u64,
    pub dropped: u64,
    pub commands: u64,
}

/// Run the session on a deadline schedule until `shutdown` is raised,
/// `max_ticks` is reached or the planner fails.
///
/// Tick `k` is released at `start + k / control_hz`, so a late tick does not
/// push back the ones after it. All pending commands are applied before each
/// tick. A planner error is published as a fault message, raises `shutdown`
/// and is returned.
pub fn run_session_loop(
    session: &mut Session,
    commands: &Receiver<OperatorCommand>,
    hub: &TelemetryHub,
    shutdown: &AtomicBool,
    options: LoopOptions,
) -> Result<LoopSummary> {
    let period = Duration::from_secs_f64(1.0 / session.control_hz());
    let start = Instant::now();
    let mut summary = LoopSummary::default();
    let mut k: u32 = 0;
    while !shutdown.load(Ordering::Acquire) && options.max_ticks.is_none_or(|m| summary.ticks < m) {
        let deadline = start + period * k;
        let now = Instant::now();
        if now < deadline {
            std::thread::sleep(deadline - now);
        } else {
            let late = (now - deadline).as_secs_f64();
            summary.max_lateness_s = summary.max_lateness_s.max(late);
            if late > period.as_secs_f64() {
                summary.overruns += 1;
            }
        }
        k += 1;

        loop {
            match commands.try_recv() {
                Ok(cmd) => {
                    summary.commands += 1;
                    if let Err(e) = session.apply(&cmd) {
                        return Err(fault(session, hub, shutdown, e));
                    }
                }
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => break,
            }
        }
        let frame = match session.step() {
            Ok(frame) => frame,
            Err(e) => return Err(fault(session, hub, shutdown, e)),
        };
        summary.ticks += 1;
        if frame.tick % options.telemetry_every == 0 {
            let stats = hub.publish(encode(&ServerMessage::Telemetry(frame)).into());
            summary.published += stats.delivered as u64;
            summary.dropped += stats.dropped as u64;
        }
    }
    Ok(summary)
}

fn fault(session: &Session, hub: &TelemetryHub, shutdown: &AtomicBool, error: crate::Error) -> crate::Error {
    let message = ServerMessage::Fault { tick: session.tick(), message: error.to_string() };
    hub.publish(encode(&message).into());
    shutdown.store(true, Ordering::Release);
    error
}
