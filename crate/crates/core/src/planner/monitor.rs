//! ELBO-based disturbance monitor and cadence response.
//!
//! The monitored quantity is the positive loss (reconstruction plus `β·KL`);
//! larger values mean the recent states are less like the training data.

use serde::{Deserialize, Serialize};

use crate::latent_control::DriveSignalState;

/// Mean and spread of a nominal ELBO trace with the derived threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mean: f64,
    pub std: f64,
    pub k_sigma: f64,
    pub threshold: f64,
    pub samples: usize,
}

pub const DEFAULT_K_SIGMA: f64 = 6.0;

/// `θ = mean + k·std` of `trace` (population std).
pub fn calibrate_threshold(trace: &[f64], k_sigma: f64) -> Calibration {
    let n = trace.len().max(1) as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let var = trace.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    Calibration { mean, std, k_sigma, threshold: mean + k_sigma * std, samples: trace.len() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorEvent {
    Calm,
    /// Above threshold with the response disabled or already active and re-armed.
    Exceeded,
    Triggered,
    Rearmed,
    Restored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboMonitor {
    pub threshold: f64,
    pub calibration: Option<Calibration>,
    pub auto_response: bool,
    pub response_active: bool,
    pub response_remaining: u32,
    /// Full response length in ticks.
    pub response_ticks: u32,
    pub nominal_period: u32,
    pub response_period: u32,
}

impl ElboMonitor {
    /// Monitor that halves the drive period for `response_s` seconds.
    pub fn new(threshold: f64, nominal_period: u32, response_s: f64, control_hz: f64) -> Self {
        Self {
            threshold,
            calibration: None,
            auto_response: true,
            response_active: false,
            response_remaining: 0,
            response_ticks: (response_s * control_hz).round().max(1.0) as u32,
            nominal_period,
            response_period: response_period_for(nominal_period),
        }
    }

    pub fn with_calibration(mut self, calibration: Calibration) -> Self {
        self.threshold = calibration.threshold;
        self.calibration = Some(calibration);
        self
    }

    /// Change the nominal cadence; the drive follows unless a response is running.
    pub fn set_nominal_period(&mut self, period: u32, drive: &mut DriveSignalState) {
        self.nominal_period = period.max(2);
        self.response_period = response_period_for(self.nominal_period);
        drive.set_period_ticks(if self.response_active { self.response_period } else { self.nominal_period });
    }

    /// Turning the response off mid-response restores the nominal period.
    pub fn set_auto_response(&mut self, enabled: bool, drive: &mut DriveSignalState) {
        self.auto_response = enabled;
        if !enabled && self.response_active {
            self.response_active = false;
            self.response_remaining = 0;
            drive.set_period_ticks(self.nominal_period);
        }
    }

    /// Feed one ELBO value; may switch the drive period.
    pub fn update(&mut self, value: f64, drive: &mut DriveSignalState) -> MonitorEvent {
        let above = value > self.threshold;
        if above && self.auto_response {
            self.response_remaining = self.response_ticks;
            if self.response_active {
                return MonitorEvent::Rearmed;
            }
            self.response_active = true;
            drive.set_period_ticks(self.response_period);
            return MonitorEvent::Triggered;
        }
        if self.response_active {
            self.response_remaining = self.response_remaining.saturating_sub(1);
            if self.response_remaining == 0 {
                self.response_active = false;
                drive.set_period_ticks(self.nominal_period);
                return MonitorEvent::Restored;
            }
        }
        if above {
            MonitorEvent::Exceeded
        } else {
            MonitorEvent::Calm
        }
    }
}

fn response_period_for(nominal: u32) -> u32 {
    (nominal / 2).max(2)
}
