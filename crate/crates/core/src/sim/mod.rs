//! Kinematic robot stand-in, scripted rollouts and disturbance experiments.

pub mod envelope;
pub mod rollout;
pub mod schedule;
pub mod state;

pub use envelope::{disturbance_envelope, trial_scenario, EnvelopePoint, EnvelopeReport, EnvelopeTrials};
pub use rollout::{
    calibrate_nominal, run_rollout, run_rollout_timed, ClosedLoop, DisturbanceOutcome, RolloutReport, RolloutTiming, Scenario,
    ScenarioEvent, Termination, TimedEvent, Warmup,
};
pub use state::{step_sim, Disturbance, SimOptions, SimState};
