//! Drive-signal oscillator and latent smoothing.

pub mod butterworth;
pub mod drive;

pub use butterworth::{design_butterworth, BiquadFilter};
pub use drive::{
    advance_phase, apply_drive, drive_value, period_ticks_for_swing, stance_ticks_for_duration,
    DriveSignalState, MIN_PERIOD_TICKS,
};
