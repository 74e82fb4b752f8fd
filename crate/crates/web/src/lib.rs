//! Browser bindings for the static demo page: drive-signal traces, the
//! Butterworth magnitude response and the oracle's trot contact schedule.
//!
//! Every export returns a flat `Float64Array` or `Uint8Array` so the page
//! can plot it without any glue beyond the generated bindings.

use gaitspace::gait_oracle::GaitParams;
use gaitspace::latent_control::{advance_phase, design_butterworth, drive_value, DriveSignalState};
use wasm_bindgen::prelude::*;

/// Drive value on each of `ticks` control ticks, starting at phase zero.
#[wasm_bindgen]
pub fn drive_trace(amplitude: f64, swing_s: f64, stance_s: f64, control_hz: f64, ticks: usize) -> Vec<f64> {
    drive_states(amplitude, swing_s, stance_s, control_hz, ticks).iter().map(drive_value).collect()
}

/// 1 on ticks where the drive sits at a zero crossing, else 0.
#[wasm_bindgen]
pub fn drive_support(amplitude: f64, swing_s: f64, stance_s: f64, control_hz: f64, ticks: usize) -> Vec<u8> {
    drive_states(amplitude, swing_s, stance_s, control_hz, ticks).iter().map(|s| u8::from(s.at_support())).collect()
}

/// `[period_ticks, stance_ticks, swing_ticks]` of the drive for these durations.
#[wasm_bindgen]
pub fn drive_ticks(swing_s: f64, stance_s: f64, control_hz: f64) -> Vec<u32> {
    let s = DriveSignalState::from_seconds(1.0, swing_s, stance_s, control_hz);
    vec![s.period_ticks, s.stance_ticks, s.swing_ticks()]
}

fn drive_states(amplitude: f64, swing_s: f64, stance_s: f64, control_hz: f64, ticks: usize) -> Vec<DriveSignalState> {
    let mut s = DriveSignalState::from_seconds(amplitude, swing_s, stance_s, control_hz);
    (0..ticks)
        .map(|_| {
            let now = s;
            s = advance_phase(&s);
            now
        })
        .collect()
}

/// Magnitude response in dB at `points` frequencies evenly spaced on
/// `(0, sample_hz/2)`, interleaved as `[f0, db0, f1, db1, ...]`. Empty when
/// the cutoff is not below Nyquist.
#[wasm_bindgen]
pub fn butterworth_response(cutoff_hz: f64, sample_hz: f64, points: usize) -> Vec<f64> {
    let Ok(filter) = design_butterworth(cutoff_hz, sample_hz, 1) else {
        return Vec::new();
    };
    let nyquist = 0.5 * sample_hz;
    (1..=points)
        .flat_map(|i| {
            let f = nyquist * i as f64 / (points + 1) as f64;
            [f, 20.0 * filter.magnitude(f, sample_hz).log10()]
        })
        .collect()
}

/// Filtered unit step over `ticks` samples.
#[wasm_bindgen]
pub fn butterworth_step(cutoff_hz: f64, sample_hz: f64, ticks: usize) -> Vec<f64> {
    let Ok(mut filter) = design_butterworth(cutoff_hz, sample_hz, 1) else {
        return Vec::new();
    };
    (0..ticks).map(|_| filter.step_channel(0, 1.0)).collect()
}

/// Oracle foot contacts, row-major `[ticks × 4]` in LF, RF, LH, RH order.
#[wasm_bindgen]
pub fn trot_schedule(swing_s: f64, full_stance_s: f64, control_hz: f64, ticks: usize) -> Vec<u8> {
    let params = GaitParams { swing_duration: swing_s, full_stance_duration: full_stance_s, ..GaitParams::default() };
    (0..ticks)
        .flat_map(|t| params.stance_at(t as f64 / control_hz).contacts().map(u8::from))
        .collect()
}
