//! Closed-loop latent planner: state buffering, encoding, drive overwrite,
//! smoothing, decoding and disturbance monitoring.

pub mod buffer;
pub mod monitor;
pub mod plan;

pub use buffer::{build_window, build_window_at, StateBuffer};
pub use monitor::{calibrate_threshold, Calibration, ElboMonitor, MonitorEvent, DEFAULT_K_SIGMA};
pub use plan::{differentiate, extract_plan, JointPlan, PlanTick, Planner, PlannerOptions};
