//! Windowed training samples drawn from a [`Dataset`].
//!
//! A sample is anchored at tick `k` of one trajectory. Its encoder window is
//! `x_{k−r(N−1)} … x_k` at stride `r`, its decoder target is `x_k … x_{k+M}`
//! at the control rate, and its contact truth is the schedule at
//! `k … k+J−1`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formats::dataset::Dataset;
use crate::gait_oracle::state::layout;
use crate::gait_oracle::trot::Stance;
use crate::vae::config::{ModelConfig, ACTION_DIM, CONTACT_FEET};
use crate::vae::loss::Batch;
use crate::vae::normalizer::Normalizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleIndex {
    pub trajectory: usize,
    pub tick: usize,
}

#[derive(Debug, Clone)]
struct CorpusTrajectory {
    features: Vec<f64>,
    contacts: Vec<[bool; 4]>,
    action: [f64; ACTION_DIM],
}

/// Normalised copy of a dataset laid out for fast window slicing.
#[derive(Debug, Clone)]
pub struct Corpus {
    config: ModelConfig,
    trajectories: Vec<CorpusTrajectory>,
}

/// Zero the contact forces of feet that are not in contact, in place on a raw feature row.
pub fn zero_free_forces_row(row: &mut [f64], contacts: &[bool; 4]) {
    for (foot, &c) in contacts.iter().enumerate() {
        if !c {
            let at = layout::LAMBDA + 3 * foot;
            row[at..at + 3].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Stance class label of a contact pattern; non-trot patterns map to 4.
pub fn stance_label(contacts: [bool; 4]) -> usize {
    Stance::from_contacts(contacts).map_or(4, Stance::class_index)
}

impl Corpus {
    pub fn new(dataset: &Dataset, config: &ModelConfig, normalizer: &Normalizer) -> Result<Self> {
        let d = config.state_dim;
        if dataset.dim() != d {
            return Err(Error::DimensionMismatch { context: "dataset features", expected: d, actual: dataset.dim() });
        }
        if normalizer.dim() != d {
            return Err(Error::DimensionMismatch { context: "normalizer", expected: d, actual: normalizer.dim() });
        }
        let trajectories = dataset
            .trajectories
            .iter()
            .map(|t| {
                let mut features: Vec<f64> = t.features.iter().map(|&v| v as f64).collect();
                for (row, contacts) in features.chunks_exact_mut(d).zip(&t.contacts) {
                    zero_free_forces_row(row, contacts);
                    normalizer.normalize_in_place(row);
                }
                let cmd = t.params.base_twist_cmd;
                CorpusTrajectory {
                    features,
                    contacts: t.contacts.clone(),
                    action: [cmd.vx, cmd.vy, cmd.yaw_rate],
                }
            })
            .collect();
        Ok(Self { config: config.clone(), trajectories })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn trajectory_count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn trajectory_len(&self, trajectory: usize) -> usize {
        self.trajectories[trajectory].contacts.len()
    }

    /// Every valid anchor tick of the listed trajectories, in order.
    pub fn sample_indices(&self, trajectories: &[usize]) -> Vec<SampleIndex> {
        let first = self.config.history_ticks() - 1;
        let tail = self.config.horizon.max(self.config.contact_steps - 1);
        trajectories
            .iter()
            .flat_map(|&trajectory| {
                let len = self.trajectory_len(trajectory);
                let last = len.saturating_sub(tail + 1);
                (first..=last)
                    .filter(move |_| len > first + tail)
                    .map(move |tick| SampleIndex { trajectory, tick })
            })
            .collect()
    }

    fn row(&self, trajectory: usize, tick: usize) -> &[f64] {
        let d = self.config.state_dim;
        &self.trajectories[trajectory].features[tick * d..(tick + 1) * d]
    }

    pub fn window_into(&self, index: SampleIndex, out: &mut [f64]) {
        let (r, n, d) = (self.config.stride(), self.config.window_len, self.config.state_dim);
        let start = index.tick - r * (n - 1);
        for i in 0..n {
            out[i * d..(i + 1) * d].copy_from_slice(self.row(index.trajectory, start + i * r));
        }
    }

    pub fn window(&self, index: SampleIndex) -> Vec<f64> {
        let mut out = vec![0.0; self.config.encoder_input_dim()];
        self.window_into(index, &mut out);
        out
    }

    pub fn target_into(&self, index: SampleIndex, out: &mut [f64]) {
        let d = self.config.state_dim;
        for m in 0..=self.config.horizon {
            out[m * d..(m + 1) * d].copy_from_slice(self.row(index.trajectory, index.tick + m));
        }
    }

    pub fn target(&self, index: SampleIndex) -> Vec<f64> {
        let mut out = vec![0.0; self.config.decoder_output_dim()];
        self.target_into(index, &mut out);
        out
    }

    /// Contact truth as `J` rows of four booleans.
    pub fn contacts(&self, index: SampleIndex) -> Vec<[bool; 4]> {
        let c = &self.trajectories[index.trajectory].contacts;
        (0..self.config.contact_steps).map(|j| c[index.tick + j]).collect()
    }

    pub fn action(&self, index: SampleIndex) -> [f64; ACTION_DIM] {
        self.trajectories[index.trajectory].action
    }

    pub fn stance_label(&self, index: SampleIndex) -> usize {
        stance_label(self.trajectories[index.trajectory].contacts[index.tick])
    }

    pub fn windows(&self, indices: &[SampleIndex]) -> Array2<f64> {
        let mut m = Array2::zeros((indices.len(), self.config.encoder_input_dim()));
        for (mut row, &idx) in m.rows_mut().into_iter().zip(indices) {
            self.window_into(idx, row.as_slice_mut().expect("contiguous"));
        }
        m
    }

    /// Assemble a batch; `noise` supplies the reparameterisation draws.
    pub fn batch(&self, indices: &[SampleIndex], noise: Array2<f64>) -> Batch {
        let b = indices.len();
        let mut actions = Array2::zeros((b, ACTION_DIM));
        let mut targets = Array2::zeros((b, self.config.decoder_output_dim()));
        let mut contacts = Array2::zeros((b, self.config.contact_output_dim()));
        for (i, &idx) in indices.iter().enumerate() {
            for (a, v) in self.action(idx).iter().enumerate() {
                actions[[i, a]] = *v;
            }
            self.target_into(idx, targets.row_mut(i).as_slice_mut().expect("contiguous"));
            for (j, step) in self.contacts(idx).iter().enumerate() {
                for (f, &c) in step.iter().enumerate() {
                    contacts[[i, j * CONTACT_FEET + f]] = if c { 1.0 } else { 0.0 };
                }
            }
        }
        Batch {
            inputs: self.windows(indices),
            actions,
            targets,
            contacts,
            noise,
        }
    }
}

/// Split trajectory ids into `(train, held_out)`; at least one held-out
/// trajectory whenever there are two or more and the fraction is positive.
pub fn split_trajectories(count: usize, held_out_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<usize> = (0..count).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held = (held_out_fraction.clamp(0.0, 1.0) * count as f64).round() as usize;
    if held_out_fraction > 0.0 && count >= 2 {
        held = held.clamp(1, count - 1);
    }
    let held_out = ids.split_off(count - held.min(count));
    ids.sort_unstable();
    let mut held_out = held_out;
    held_out.sort_unstable();
    (ids, held_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_oracle::{synthesize_dataset, GaitParams, OracleOptions, QuadrupedGeometry, TwistRange};

    fn fixture() -> (Dataset, ModelConfig, Normalizer) {
        let options = OracleOptions { duration: 3.0, ..OracleOptions::default() };
        let ds = synthesize_dataset(
            2,
            &TwistRange::default(),
            &GaitParams::default(),
            &QuadrupedGeometry::default(),
            &options,
            4,
        )
        .unwrap();
        let cfg = ModelConfig::desk_scale();
        let norm = Normalizer::from_statistics(&ds.mean, &ds.std).unwrap();
        (ds, cfg, norm)
    }

    #[test]
    fn window_matches_naive_slice() {
        let (ds, cfg, norm) = fixture();
        let corpus = Corpus::new(&ds, &cfg, &norm).unwrap();
        let idx = SampleIndex { trajectory: 1, tick: 120 };
        let w = corpus.window(idx);
        let d = cfg.state_dim;
        let traj = &ds.trajectories[1];
        for i in 0..cfg.window_len {
            let tick = 120 - cfg.stride() * (cfg.window_len - 1) + i * cfg.stride();
            let mut raw: Vec<f64> = traj.row(d, tick).iter().map(|&v| v as f64).collect();
            zero_free_forces_row(&mut raw, &traj.contacts[tick]);
            let expect = norm.normalize(&raw);
            assert_eq!(&w[i * d..(i + 1) * d], expect.as_slice());
        }
    }

    #[test]
    fn indices_stay_in_bounds() {
        let (ds, cfg, norm) = fixture();
        let corpus = Corpus::new(&ds, &cfg, &norm).unwrap();
        let idx = corpus.sample_indices(&[0, 1]);
        let len = corpus.trajectory_len(0);
        assert_eq!(idx.first().unwrap().tick, cfg.history_ticks() - 1);
        assert_eq!(idx.iter().filter(|i| i.trajectory == 0).last().unwrap().tick, len - 1 - cfg.horizon);
        let b = corpus.batch(&idx[..5], Array2::zeros((5, cfg.latent_dim)));
        assert_eq!(b.targets.ncols(), cfg.decoder_output_dim());
        assert!(b.contacts.iter().all(|&c| c == 0.0 || c == 1.0));
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let (a, b) = split_trajectories(10, 0.2, 7);
        assert_eq!(b.len(), 2);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(split_trajectories(10, 0.2, 7), (a, b));
        assert_eq!(split_trajectories(3, 0.01, 1).1.len(), 1);
        assert!(split_trajectories(3, 0.0, 1).1.is_empty());
    }
}
