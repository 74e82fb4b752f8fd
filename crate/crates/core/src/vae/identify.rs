//! Spectral identification of the latent dimension that carries the gait oscillation.
//!
//! Power at a single frequency is estimated with Welch averaging: Hann
//! windowed segments roughly four gait periods long, 50% overlap, each
//! segment mean-removed, and the squared magnitude of the windowed DFT at
//! the target frequency averaged over segments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vae::model::VaeModel;
use crate::vae::samples::{Corpus, SampleIndex};

/// Top-two powers closer than this relative margin are ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 0.10;
const SEGMENT_PERIODS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveIdentification {
    pub dimension: usize,
    /// Per-dimension power at the gait frequency.
    pub powers: Vec<f64>,
}

impl DriveIdentification {
    /// Power of the chosen dimension over the median of all dimensions.
    pub fn power_ratio_to_median(&self) -> f64 {
        let mut sorted = self.powers.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        self.powers[self.dimension] / median.max(f64::MIN_POSITIVE)
    }
}

/// Gait frequency of a trot with the given swing and full-stance durations.
pub fn gait_frequency(swing_s: f64, stance_s: f64) -> f64 {
    1.0 / (2.0 * (swing_s + stance_s))
}

/// Welch estimate of the power of `trace` at `freq_hz`.
pub fn spectral_power(trace: &[f64], sample_hz: f64, freq_hz: f64) -> f64 {
    let n = trace.len();
    if n < 2 {
        return 0.0;
    }
    let seg = ((SEGMENT_PERIODS * sample_hz / freq_hz).round() as usize).clamp(2, n);
    let hop = (seg / 2).max(1);
    let window: Vec<f64> = (0..seg).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (seg - 1) as f64).cos()).collect();
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let omega = 2.0 * PI * freq_hz / sample_hz;
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..seg).map(|i| ((omega * i as f64).cos(), (omega * i as f64).sin())).unzip();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + seg <= n {
        let s = &trace[start..start + seg];
        let mean = s.iter().sum::<f64>() / seg as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..seg {
            let v = (s[i] - mean) * window[i];
            re += v * cos[i];
            im -= v * sin[i];
        }
        total += (re * re + im * im) / norm;
        count += 1;
        start += hop;
    }
    total / count as f64
}

/// Pick the dimension of `latents` (`[time][d_z]`) with most power at `gait_hz`.
pub fn identify_from_traces(latents: &[Vec<f64>], sample_hz: f64, gait_hz: f64) -> Result<DriveIdentification> {
    let dz = latents.first().map_or(0, Vec::len);
    if dz < 2 {
        return Err(Error::DimensionMismatch { context: "latent traces", expected: 2, actual: dz });
    }
    let powers: Vec<f64> = (0..dz)
        .map(|d| {
            let trace: Vec<f64> = latents.iter().map(|z| z[d]).collect();
            spectral_power(&trace, sample_hz, gait_hz)
        })
        .collect();
    pick(&powers)
}

/// Encode consecutive windows of one corpus trajectory (posterior means).
pub fn encode_trajectory(model: &VaeModel, corpus: &Corpus, trajectory: usize) -> Result<Vec<Vec<f64>>> {
    let indices: Vec<SampleIndex> = corpus.sample_indices(&[trajectory]);
    let means = model.encode_means(corpus.windows(&indices).view())?;
    Ok(means.rows().into_iter().map(|r| r.to_vec()).collect())
}

/// Identify the drive dimension from nominal trajectories and store it in `model`.
///
/// Traces from each trajectory are analysed separately and their powers summed.
pub fn identify_drive_dimension(
    model: &mut VaeModel,
    corpus: &Corpus,
    trajectories: &[usize],
    gait_hz: f64,
) -> Result<DriveIdentification> {
    let dz = model.latent_dim();
    let mut powers = vec![0.0; dz];
    let mut used = 0usize;
    for &t in trajectories {
        let traces = encode_trajectory(model, corpus, t)?;
        if traces.len() < 2 {
            continue;
        }
        for (d, p) in powers.iter_mut().enumerate() {
            let trace: Vec<f64> = traces.iter().map(|z| z[d]).collect();
            *p += spectral_power(&trace, model.config.control_hz, gait_hz);
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientHistory { needed: model.config.history_ticks() + 1, available: 0 });
    }
    let id = pick(&powers)?;
    model.drive_dimension = Some(id.dimension);
    Ok(id)
}

fn pick(powers: &[f64]) -> Result<DriveIdentification> {
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| powers[b].total_cmp(&powers[a]));
    let (best, second) = (order[0], order[1]);
    if powers[best] - powers[second] < AMBIGUITY_MARGIN * powers[best] {
        return Err(Error::AmbiguousDrive {
            best_dim: best,
            best: powers[best],
            second_dim: second,
            second: powers[second],
        });
    }
    Ok(DriveIdentification { dimension: best, powers: powers.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn pure_sinusoid_in_dim_three() {
        let hz = 100.0;
        let f = gait_frequency(0.5, 0.075);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traces: Vec<Vec<f64>> = (0..3000)
            .map(|t| {
                (0..8)
                    .map(|d| {
                        if d == 3 {
                            (2.0 * PI * f * t as f64 / hz).sin()
                        } else {
                            0.05 * rng.sample::<f64, _>(StandardNormal)
                        }
                    })
                    .collect()
            })
            .collect();
        let id = identify_from_traces(&traces, hz, f).unwrap();
        assert_eq!(id.dimension, 3);
        assert!(id.power_ratio_to_median() > 100.0);
    }

    #[test]
    fn power_of_unit_sine_is_independent_of_length() {
        let hz = 100.0;
        let f = 1.0;
        let sine = |n: usize| (0..n).map(|t| (2.0 * PI * f * t as f64 / hz).sin()).collect::<Vec<_>>();
        let a = spectral_power(&sine(2000), hz, f);
        let b = spectral_power(&sine(8000), hz, f);
        assert!((a - b).abs() < 1e-3 * a);
        // Off-frequency power is much smaller.
        assert!(spectral_power(&sine(2000), hz, 3.0) < 1e-3 * a);
    }

    #[test]
    fn constant_trace_has_no_power() {
        assert!(spectral_power(&[2.5; 500], 100.0, 1.0) < 1e-20);
    }

    #[test]
    fn white_noise_is_ambiguous() {
        let hz = 100.0;
        let f = gait_frequency(0.5, 0.075);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let traces: Vec<Vec<f64>> = (0..200_000)
            .map(|_| (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        assert!(matches!(identify_from_traces(&traces, hz, f), Err(Error::AmbiguousDrive { .. })));
    }
}
