//! Text wire protocol between the session host and operator consoles.
//!
//! Every message is one JSON object carrying a `type` tag and a `v` version
//! field (currently `1`). Decoders ignore fields they do not know, so newer
//! peers may add fields without breaking older ones. `docs/wire-protocol.md`
//! lists every message with units.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::latent_control::MIN_PERIOD_TICKS;
use crate::sim::ScenarioEvent;

pub const PROTOCOL_VERSION: u64 = 1;

/// Drive oscillator state at the tick a frame describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSnapshot {
    /// Latent units.
    pub amplitude: f64,
    /// Duration of one diagonal pair's swing, seconds (half the drive period).
    pub swing_period_s: f64,
    /// Full-support hold at each zero crossing, seconds.
    pub stance_duration_s: f64,
    /// Oscillator phase in `[0, 2π)`.
    pub phase: f64,
    pub period_ticks: u32,
    pub stance_ticks: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireTwist {
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

/// One control tick as seen by an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub tick: u64,
    pub time_s: f64,
    pub drive: DriveSnapshot,
    pub twist: WireTwist,
    /// Predicted stance probabilities, one `[LF, RF, LH, RH]` row per
    /// decoded tick starting at the current one.
    pub contact_probabilities: Vec<[f64; 4]>,
    /// Contacts executed by the simulator this tick.
    pub contacts: [bool; 4],
    /// `null` until the history covers a full horizon.
    pub elbo: Option<f64>,
    /// `null` when no threshold is calibrated.
    pub threshold: Option<f64>,
    pub response_active: bool,
    pub auto_response: bool,
    pub base_pose: WirePose,
    /// Radians, leg-major `[LF hip, LF thigh, LF knee, RF …]`.
    pub joint_positions: [f64; 12],
    /// Metres above the ground plane.
    pub foot_heights: [f64; 4],
    pub fallen: bool,
}

/// Messages sent by the session host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every connection.
    Hello { control_hz: f64, telemetry_hz: f64 },
    Telemetry(TelemetryFrame),
    /// The control loop stopped on an error and will not restart.
    Fault { tick: u64, message: String },
    /// Reply to a message that could not be decoded; the session continues.
    Error { message: String },
}

/// Messages sent by an operator. Every setter is absolute, so repeating a
/// command has no further effect; impulses carrying an `id` are applied once
/// per id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    /// Latent units.
    SetAmplitude { amplitude: f64 },
    SetSwingPeriod { seconds: f64 },
    SetStanceDuration { seconds: f64 },
    SetTwist { vx: f64, vy: f64, yaw_rate: f64 },
    /// Base velocity offset (m/s, m/s, rad/s) decaying with `decay_s`.
    InjectImpulse {
        vx: f64,
        vy: f64,
        #[serde(default)]
        yaw_rate: f64,
        #[serde(default = "default_decay")]
        decay_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    SetAutoResponse { enabled: bool },
    Reset {},
}

fn default_decay() -> f64 {
    0.2
}

/// Server-side ranges applied to every operator command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandLimits {
    pub control_hz: f64,
    pub max_amplitude: f64,
    pub max_swing_s: f64,
    pub max_stance_s: f64,
    /// Per-component bound on commanded twist (m/s, m/s, rad/s).
    pub max_twist: [f64; 3],
    pub max_impulse: [f64; 3],
    pub decay_s: [f64; 2],
}

impl CommandLimits {
    pub fn for_rate(control_hz: f64) -> Self {
        Self {
            control_hz,
            max_amplitude: 10.0,
            max_swing_s: 5.0,
            max_stance_s: 2.0,
            max_twist: [1.0, 0.5, 1.5],
            max_impulse: [5.0, 5.0, 5.0],
            decay_s: [0.01, 5.0],
        }
    }

    /// Shortest swing that still gives a drive period of two ticks.
    pub fn min_swing_s(&self) -> f64 {
        MIN_PERIOD_TICKS as f64 / (2.0 * self.control_hz)
    }
}

fn clamp_sym(v: f64, bound: f64) -> f64 {
    v.clamp(-bound, bound)
}

impl OperatorCommand {
    /// Copy with every value forced into `limits`.
    pub fn clamped(&self, limits: &CommandLimits) -> Self {
        use OperatorCommand::*;
        match *self {
            SetAmplitude { amplitude } => SetAmplitude { amplitude: amplitude.clamp(0.0, limits.max_amplitude) },
            SetSwingPeriod { seconds } => SetSwingPeriod { seconds: seconds.clamp(limits.min_swing_s(), limits.max_swing_s) },
            SetStanceDuration { seconds } => SetStanceDuration { seconds: seconds.clamp(0.0, limits.max_stance_s) },
            SetTwist { vx, vy, yaw_rate } => SetTwist {
                vx: clamp_sym(vx, limits.max_twist[0]),
                vy: clamp_sym(vy, limits.max_twist[1]),
                yaw_rate: clamp_sym(yaw_rate, limits.max_twist[2]),
            },
            InjectImpulse { vx, vy, yaw_rate, decay_s, id } => InjectImpulse {
                vx: clamp_sym(vx, limits.max_impulse[0]),
                vy: clamp_sym(vy, limits.max_impulse[1]),
                yaw_rate: clamp_sym(yaw_rate, limits.max_impulse[2]),
                decay_s: decay_s.clamp(limits.decay_s[0], limits.decay_s[1]),
                id,
            },
            SetAutoResponse { enabled } => SetAutoResponse { enabled },
            Reset {} => Reset {},
        }
    }

    /// The scenario event with the same effect; `None` for `reset`.
    pub fn to_event(&self) -> Option<ScenarioEvent> {
        use OperatorCommand::*;
        Some(match *self {
            SetAmplitude { amplitude } => ScenarioEvent::SetAmplitude { amplitude },
            SetSwingPeriod { seconds } => ScenarioEvent::SetSwingPeriod { seconds },
            SetStanceDuration { seconds } => ScenarioEvent::SetStanceDuration { seconds },
            SetTwist { vx, vy, yaw_rate } => ScenarioEvent::SetTwist { vx, vy, yaw_rate },
            InjectImpulse { vx, vy, yaw_rate, decay_s, .. } => ScenarioEvent::Impulse { vx, vy, yaw_rate, decay_s },
            SetAutoResponse { enabled } => ScenarioEvent::SetAutoResponse { enabled },
            Reset {} => return None,
        })
    }
}

/// Serialize `message` and stamp the protocol version.
pub fn encode<T: Serialize>(message: &T) -> String {
    let mut value = serde_json::to_value(message).expect("wire messages serialize to JSON");
    if let Value::Object(map) = &mut value {
        map.insert("v".into(), Value::from(PROTOCOL_VERSION));
    }
    value.to_string()
}

pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::MalformedMessage(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(Error::MalformedMessage("expected a JSON object".into()));
    };
    match map.get("v").and_then(Value::as_u64) {
        Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(Error::MalformedMessage(format!("unsupported protocol version {v}"))),
        None => return Err(Error::MalformedMessage("missing version field `v`".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::MalformedMessage(e.to_string()))
}

pub fn decode_command(text: &str) -> Result<OperatorCommand> {
    decode(text)
}

pub fn decode_server(text: &str) -> Result<ServerMessage> {
    decode(text)
}
