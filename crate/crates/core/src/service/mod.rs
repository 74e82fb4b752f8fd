//! Real-time session host: runs planner and simulator at a fixed rate,
//! streams telemetry and applies operator commands.

pub mod session;
pub mod transport;
pub mod wire;

pub use session::{run_session_loop, LoopOptions, LoopSummary, PublishStats, Session, TelemetryHub};
pub use transport::serve;
pub use wire::{decode_command, decode_server, encode, OperatorCommand, ServerMessage, TelemetryFrame, PROTOCOL_VERSION};
