use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features whose training spread is below this are centred but not scaled.
pub const MIN_STD: f64 = 1e-6;

/// Per-feature z-score normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Builds from raw statistics, replacing degenerate spreads by 1.
    pub fn from_statistics(mean: &[f64], std: &[f64]) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                context: "normalizer statistics",
                expected: mean.len(),
                actual: std.len(),
            });
        }
        let std = std
            .iter()
            .map(|&s| if s.is_finite() && s >= MIN_STD { s } else { 1.0 })
            .collect();
        Ok(Self { mean: mean.to_vec(), std })
    }

    /// Like [`Normalizer::from_statistics`], but no spread within a group of
    /// features may fall below `floor_fraction` of the group's largest spread.
    /// Groups are `(start, len)` ranges; features outside every group keep
    /// their own spread.
    pub fn from_grouped_statistics(
        mean: &[f64],
        std: &[f64],
        groups: &[(usize, usize)],
        floor_fraction: f64,
    ) -> Result<Self> {
        let mut n = Self::from_statistics(mean, std)?;
        for &(start, len) in groups {
            let block = std.get(start..start + len).ok_or(Error::DimensionMismatch {
                context: "normalizer feature group",
                expected: start + len,
                actual: std.len(),
            })?;
            let widest = block.iter().copied().filter(|s| s.is_finite() && *s >= MIN_STD).fold(0.0, f64::max);
            let floor = widest * floor_fraction;
            for (i, &raw) in block.iter().enumerate() {
                if raw.is_finite() && raw >= MIN_STD {
                    n.std[start + i] = raw.max(floor);
                }
            }
        }
        Ok(n)
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::ShapeMismatch("normalizer mean/std lengths differ".into()));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::ShapeMismatch("normalizer std must be positive".into()));
        }
        Ok(())
    }

    /// Normalise consecutive states packed in `values` in place.
    pub fn normalize_in_place(&self, values: &mut [f64]) {
        let d = self.dim();
        for (i, v) in values.iter_mut().enumerate() {
            let f = i % d;
            *v = (*v - self.mean[f]) / self.std[f];
        }
    }

    pub fn denormalize_in_place(&self, values: &mut [f64]) {
        let d = self.dim();
        for (i, v) in values.iter_mut().enumerate() {
            let f = i % d;
            *v = *v * self.std[f] + self.mean[f];
        }
    }

    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        self.normalize_in_place(&mut v);
        v
    }

    pub fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        self.denormalize_in_place(&mut v);
        v
    }
}
