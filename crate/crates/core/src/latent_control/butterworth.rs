use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Second-order low-pass section, `a0 = 1`, advanced in transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadFilter {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    state: Vec<[f64; 2]>,
}

/// Bilinear-transform Butterworth low-pass (Q = 1/√2) with pre-warped cutoff.
pub fn design_butterworth(cutoff_hz: f64, sample_hz: f64, channels: usize) -> Result<BiquadFilter> {
    if !(cutoff_hz > 0.0 && sample_hz.is_finite() && cutoff_hz < 0.5 * sample_hz) {
        return Err(Error::InvalidCutoff { cutoff_hz, sample_hz });
    }
    let k = (PI * cutoff_hz / sample_hz).tan();
    let q = 1.0 / SQRT_2;
    let norm = 1.0 / (1.0 + k / q + k * k);
    let b0 = k * k * norm;
    Ok(BiquadFilter {
        b0,
        b1: 2.0 * b0,
        b2: b0,
        a1: 2.0 * (k * k - 1.0) * norm,
        a2: (1.0 - k / q + k * k) * norm,
        state: vec![[0.0; 2]; channels],
    })
}

impl BiquadFilter {
    pub fn channels(&self) -> usize {
        self.state.len()
    }

    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Complex response magnitude at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_hz;
        let (s1, c1) = w.sin_cos();
        let (s2, c2) = (2.0 * w).sin_cos();
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, -(self.b1 * s1 + self.b2 * s2));
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, -(self.a1 * s1 + self.a2 * s2));
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = [0.0; 2]);
    }

    /// Set the state to the steady state of a constant input `value`.
    pub fn prime(&mut self, value: &[f64]) {
        for (s, &x) in self.state.iter_mut().zip(value) {
            let s2 = (self.b2 - self.a2) * x;
            let s1 = (self.b1 - self.a1) * x + s2;
            *s = [s1, s2];
        }
    }

    pub fn step_channel(&mut self, channel: usize, x: f64) -> f64 {
        let [s1, s2] = self.state[channel];
        let y = self.b0 * x + s1;
        self.state[channel] = [self.b1 * x - self.a1 * y + s2, self.b2 * x - self.a2 * y];
        y
    }

    /// Filter one sample per channel.
    pub fn apply(&mut self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.channels() {
            return Err(Error::DimensionMismatch {
                context: "filter input",
                expected: self.channels(),
                actual: z.len(),
            });
        }
        Ok(z.iter().enumerate().map(|(c, &x)| self.step_channel(c, x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cutoff_at_or_above_nyquist() {
        assert!(matches!(design_butterworth(50.0, 100.0, 1), Err(Error::InvalidCutoff { .. })));
        assert!(matches!(design_butterworth(0.0, 100.0, 1), Err(Error::InvalidCutoff { .. })));
    }

    #[test]
    fn unity_dc_gain() {
        for (fc, fs) in [(10.0, 100.0), (10.0, 400.0), (1.0, 1000.0), (45.0, 100.0)] {
            let f = design_butterworth(fc, fs, 1).unwrap();
            assert!((f.b0 + f.b1 + f.b2 - (1.0 + f.a1 + f.a2)).abs() < 1e-12);
            assert!(f.is_stable());
        }
    }

    #[test]
    fn constant_input_converges() {
        let mut f = design_butterworth(10.0, 100.0, 2).unwrap();
        let mut y = vec![0.0; 2];
        for _ in 0..1000 {
            y = f.apply(&[2.5, -1.0]).unwrap();
        }
        assert!((y[0] - 2.5).abs() < 1e-9 && (y[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_in_zero_out() {
        let mut f = design_butterworth(10.0, 100.0, 3).unwrap();
        for _ in 0..10 {
            assert_eq!(f.apply(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn impulse_matches_difference_equation() {
        let mut f = design_butterworth(10.0, 100.0, 1).unwrap();
        let (b0, b1, b2, a1, a2) = (f.b0, f.b1, f.b2, f.a1, f.a2);
        // y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
        let x = |n: i32| if n == 0 { 1.0 } else { 0.0 };
        let mut y = [0.0f64; 10];
        for n in 0..10i32 {
            let ym1 = if n >= 1 { y[(n - 1) as usize] } else { 0.0 };
            let ym2 = if n >= 2 { y[(n - 2) as usize] } else { 0.0 };
            y[n as usize] = b0 * x(n) + b1 * x(n - 1) + b2 * x(n - 2) - a1 * ym1 - a2 * ym2;
        }
        for (n, expected) in y.iter().enumerate() {
            let got = f.step_channel(0, x(n as i32));
            assert!((got - expected).abs() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn primed_filter_passes_constant_unchanged() {
        let mut f = design_butterworth(10.0, 100.0, 2).unwrap();
        f.prime(&[0.3, -2.0]);
        let y = f.apply(&[0.3, -2.0]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-14 && (y[1] + 2.0).abs() < 1e-14);
    }
}
