//! Drive signal `A·sin³(φ)` and its phase / stance-counter dynamics.
//!
//! The phase is stored as a count of completed half-cycles plus an offset in
//! `[0, π)`, so the support condition `φ mod π = 0` is an exact test on the
//! offset. An increment that would reach or cross the next multiple of π
//! lands exactly on it; the hold starts on the following tick.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PERIOD_TICKS: u32 = 2;

const WRAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSignalState {
    /// Amplitude in latent units.
    pub amplitude: f64,
    /// Oscillation period `T_k` in control ticks; the phase advances `2π/T_k` per tick.
    pub period_ticks: u32,
    /// Stance extension `ε_k` in control ticks, held at every multiple of π.
    pub stance_ticks: u32,
    /// Completed half-cycles.
    pub half_cycles: u64,
    /// Phase within the current half-cycle, `[0, π)`.
    pub offset: f64,
    /// Stance counter `k_ε`.
    pub hold_count: u32,
}

impl DriveSignalState {
    pub fn new(amplitude: f64, period_ticks: u32, stance_ticks: u32) -> Self {
        let mut s = Self {
            amplitude: 0.0,
            period_ticks: MIN_PERIOD_TICKS,
            stance_ticks,
            half_cycles: 0,
            offset: 0.0,
            hold_count: 0,
        };
        s.set_amplitude(amplitude);
        s.set_period_ticks(period_ticks);
        s
    }

    /// Drive whose lobes last `swing_s` and whose zero crossings hold for `stance_s`.
    pub fn from_seconds(amplitude: f64, swing_s: f64, stance_s: f64, control_hz: f64) -> Self {
        Self::new(
            amplitude,
            period_ticks_for_swing(swing_s, control_hz),
            stance_ticks_for_duration(stance_s, control_hz),
        )
    }

    pub fn set_amplitude(&mut self, amplitude: f64) {
        self.amplitude = if amplitude.is_finite() { amplitude.max(0.0) } else { 0.0 };
    }

    pub fn set_period_ticks(&mut self, ticks: u32) {
        self.period_ticks = ticks.max(MIN_PERIOD_TICKS);
    }

    pub fn set_stance_ticks(&mut self, ticks: u32) {
        self.stance_ticks = ticks;
        self.hold_count = self.hold_count.min(ticks);
    }

    /// `φ` as a real number (unbounded).
    pub fn phase(&self) -> f64 {
        self.half_cycles as f64 * PI + self.offset
    }

    /// Phase wrapped into `[0, 2π)`.
    pub fn wrapped_phase(&self) -> f64 {
        (self.half_cycles % 2) as f64 * PI + self.offset
    }

    pub fn at_support(&self) -> bool {
        self.offset == 0.0
    }

    pub fn phase_increment(&self) -> f64 {
        2.0 * PI / self.period_ticks as f64
    }

    /// Lobe length in ticks: advances needed to travel one half-cycle.
    pub fn swing_ticks(&self) -> u32 {
        self.period_ticks.div_ceil(2)
    }
}

/// `T_k` such that one half-cycle (one diagonal pair's swing) spans `swing_s`.
pub fn period_ticks_for_swing(swing_s: f64, control_hz: f64) -> u32 {
    let ticks = (2.0 * swing_s * control_hz).round();
    if ticks.is_finite() && ticks >= MIN_PERIOD_TICKS as f64 {
        ticks.min(u32::MAX as f64) as u32
    } else {
        MIN_PERIOD_TICKS
    }
}

pub fn stance_ticks_for_duration(stance_s: f64, control_hz: f64) -> u32 {
    let ticks = (stance_s * control_hz).round();
    if ticks.is_finite() && ticks > 0.0 {
        ticks.min(u32::MAX as f64) as u32
    } else {
        0
    }
}

/// `A·sin³(φ)`, exactly zero at every multiple of π.
pub fn drive_value(state: &DriveSignalState) -> f64 {
    if state.offset == 0.0 {
        return 0.0;
    }
    let s = state.offset.sin();
    let sign = if state.half_cycles % 2 == 0 { 1.0 } else { -1.0 };
    sign * state.amplitude * s * s * s
}

/// One control tick of the phase and stance-counter dynamics.
pub fn advance_phase(state: &DriveSignalState) -> DriveSignalState {
    let mut next = *state;
    if next.at_support() && next.hold_count < next.stance_ticks {
        next.hold_count += 1;
        return next;
    }
    next.hold_count = 0;
    let advanced = next.offset + next.phase_increment();
    // Summed increments can fall a rounding error short of π.
    if advanced >= PI - WRAP_SLACK {
        next.half_cycles += 1;
        next.offset = 0.0;
    } else {
        next.offset = advanced;
    }
    next
}

/// Overwrite latent coordinate `dimension` with the drive value.
pub fn apply_drive(z: &[f64], state: &DriveSignalState, dimension: usize) -> Result<Vec<f64>> {
    if dimension >= z.len() {
        return Err(Error::IndexOutOfRange { index: dimension, len: z.len() });
    }
    let mut out = z.to_vec();
    out[dimension] = drive_value(state);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(half_cycles: u64, offset: f64, amplitude: f64) -> DriveSignalState {
        DriveSignalState { half_cycles, offset, ..DriveSignalState::new(amplitude, 50, 5) }
    }

    #[test]
    fn drive_values() {
        assert!((drive_value(&at(0, PI / 2.0, 1.0)) - 1.0).abs() < 1e-15);
        assert_eq!(drive_value(&at(0, 0.0, 3.7)), 0.0);
        assert!((drive_value(&at(0, PI / 6.0, 1.5)) - 0.1875).abs() < 1e-15);
        // Second lobe is negative.
        assert!((drive_value(&at(1, PI / 2.0, 1.0)) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn hold_at_support() {
        let s = at(1, 0.0, 1.0);
        let n = advance_phase(&s);
        assert_eq!((n.half_cycles, n.offset, n.hold_count), (1, 0.0, 1));
    }

    #[test]
    fn advance_off_support() {
        let s = at(0, PI / 2.0, 1.0);
        let n = advance_phase(&s);
        assert_eq!(n.offset, PI / 2.0 + 2.0 * PI / 50.0);
        assert_eq!(n.hold_count, 0);
    }

    #[test]
    fn lobe_length_is_exact_for_every_period() {
        for period in MIN_PERIOD_TICKS..=200 {
            let mut s = DriveSignalState::new(1.0, period, 0);
            for half in 1..=6u64 {
                for _ in 0..period.div_ceil(2) {
                    s = advance_phase(&s);
                }
                assert_eq!((s.half_cycles, s.offset), (half, 0.0), "T={period}");
            }
        }
    }

    #[test]
    fn zero_stance_never_holds() {
        let mut s = DriveSignalState::new(1.0, 20, 0);
        let mut holds = 0;
        for _ in 0..(10 * 20) {
            let n = advance_phase(&s);
            if n.phase() == s.phase() {
                holds += 1;
            }
            s = n;
        }
        assert_eq!(holds, 0);
        assert_eq!(s.half_cycles, 20);
    }

    #[test]
    fn crossing_snaps_onto_multiple_of_pi() {
        // Period 7 does not divide π evenly.
        let mut s = DriveSignalState::new(1.0, 7, 0);
        let mut ticks = 0;
        while s.half_cycles == 0 {
            s = advance_phase(&s);
            ticks += 1;
        }
        assert_eq!(s.offset, 0.0);
        assert_eq!(ticks, 4);
        assert_eq!(drive_value(&s), 0.0);
    }

    #[test]
    fn tick_conversions() {
        assert_eq!(period_ticks_for_swing(0.3125, 100.0), 63);
        assert_eq!(period_ticks_for_swing(0.125, 100.0), 25);
        assert_eq!(period_ticks_for_swing(0.001, 100.0), MIN_PERIOD_TICKS);
        assert_eq!(stance_ticks_for_duration(0.0625, 100.0), 6);
        assert_eq!(stance_ticks_for_duration(-1.0, 100.0), 0);
    }

    #[test]
    fn apply_drive_overwrites_one_channel() {
        let z = vec![0.1, 0.2, 0.3];
        let s = at(0, PI / 2.0, 0.0);
        assert_eq!(apply_drive(&z, &s, 1).unwrap(), vec![0.1, 0.0, 0.3]);
        assert!(matches!(apply_drive(&z, &s, 3), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
    }
}
