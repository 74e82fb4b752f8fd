//! Held-out evaluation of a trained model.

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::vae::config::CONTACT_FEET;
use crate::vae::model::{sigmoid, VaeModel};
use crate::vae::samples::{Corpus, SampleIndex};

const CHUNK: usize = 512;

fn chunks(indices: &[SampleIndex]) -> impl Iterator<Item = &[SampleIndex]> {
    indices.chunks(CHUNK)
}

/// Mean squared error per normalised output, decoding the posterior mean.
pub fn reconstruction_mse(model: &VaeModel, corpus: &Corpus, indices: &[SampleIndex]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for part in chunks(indices) {
        let batch = corpus.batch(part, Array2::zeros((part.len(), model.latent_dim())));
        let z = model.encode_means(batch.inputs.view())?;
        let dec_in = concatenate(Axis(1), &[z.view(), batch.actions.view()]).expect("rows");
        let pred = model.networks.decoder.infer(dec_in.view())?;
        sum += (&pred - &batch.targets).iter().map(|r| r * r).sum::<f64>();
        count += pred.len();
    }
    Ok(sum / count.max(1) as f64)
}

/// Contact accuracy at threshold 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactAccuracy {
    /// Fraction of (sample, step) pairs where all four feet are right.
    pub per_tick: f64,
    /// Fraction of individual foot entries that are right.
    pub per_foot: f64,
}

pub fn contact_accuracy(model: &VaeModel, corpus: &Corpus, indices: &[SampleIndex]) -> Result<ContactAccuracy> {
    let j = model.config.contact_steps;
    let (mut ticks_ok, mut feet_ok, mut ticks) = (0usize, 0usize, 0usize);
    for part in chunks(indices) {
        let batch = corpus.batch(part, Array2::zeros((part.len(), model.latent_dim())));
        let z = model.encode_means(batch.inputs.view())?;
        let logits = model.networks.predictor.infer(z.view())?;
        for (l, truth) in logits.rows().into_iter().zip(batch.contacts.rows()) {
            for step in 0..j {
                let range = step * CONTACT_FEET..(step + 1) * CONTACT_FEET;
                let ok = range
                    .clone()
                    .filter(|&i| (sigmoid(l[i]) >= 0.5) == (truth[i] > 0.5))
                    .count();
                feet_ok += ok;
                ticks_ok += usize::from(ok == CONTACT_FEET);
                ticks += 1;
            }
        }
    }
    let ticks = ticks.max(1) as f64;
    Ok(ContactAccuracy {
        per_tick: ticks_ok as f64 / ticks,
        per_foot: feet_ok as f64 / (ticks * CONTACT_FEET as f64),
    })
}

/// Posterior means and stance labels of the given samples.
pub fn latent_means_with_labels(
    model: &VaeModel,
    corpus: &Corpus,
    indices: &[SampleIndex],
) -> Result<(Array2<f64>, Vec<usize>)> {
    let mut parts = Vec::new();
    for part in chunks(indices) {
        parts.push(model.encode_means(corpus.windows(part).view())?);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let means = if views.is_empty() {
        Array2::zeros((0, model.latent_dim()))
    } else {
        concatenate(Axis(0), &views).expect("same width")
    };
    Ok((means, indices.iter().map(|&i| corpus.stance_label(i)).collect()))
}

/// k-nearest-neighbour classification accuracy (Euclidean, majority vote,
/// ties broken towards the nearest member).
pub fn knn_accuracy(
    train: &Array2<f64>,
    train_labels: &[usize],
    test: &Array2<f64>,
    test_labels: &[usize],
    k: usize,
) -> f64 {
    let k = k.clamp(1, train.nrows().max(1));
    let classes = train_labels.iter().chain(test_labels).copied().max().unwrap_or(0) + 1;
    let mut correct = 0usize;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(train.nrows());
    for (row, &truth) in test.rows().into_iter().zip(test_labels) {
        dist.clear();
        dist.extend(train.rows().into_iter().zip(train_labels).map(|(t, &l)| {
            (t.iter().zip(row.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), l)
        }));
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let nearest = &mut dist[..k];
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut votes = vec![0usize; classes];
        for &(_, l) in nearest.iter() {
            votes[l] += 1;
        }
        let top = *votes.iter().max().expect("classes");
        let predicted = nearest.iter().find(|(_, l)| votes[*l] == top).expect("k >= 1").1;
        correct += usize::from(predicted == truth);
    }
    correct as f64 / test.nrows().max(1) as f64
}

/// Least-squares linear classifier for two classes (labels 0/1): fit
/// `w·[x,1] ≈ ±1` on `train`, report accuracy of `sign` on `test`.
pub fn linear_separability(train: &Array2<f64>, train_labels: &[bool], test: &Array2<f64>, test_labels: &[bool]) -> f64 {
    let d = train.ncols() + 1;
    let mut ata = vec![vec![0.0; d]; d];
    let mut atb = vec![0.0; d];
    for (row, &l) in train.rows().into_iter().zip(train_labels) {
        let x: Vec<f64> = row.iter().copied().chain(std::iter::once(1.0)).collect();
        let y = if l { 1.0 } else { -1.0 };
        for i in 0..d {
            atb[i] += x[i] * y;
            for j in 0..d {
                ata[i][j] += x[i] * x[j];
            }
        }
    }
    for (i, r) in ata.iter_mut().enumerate() {
        r[i] += 1e-9;
    }
    let w = solve(ata, atb);
    let correct = test
        .rows()
        .into_iter()
        .zip(test_labels)
        .filter(|(row, &l)| {
            let score: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[d - 1];
            (score >= 0.0) == l
        })
        .count();
    correct as f64 / test.nrows().max(1) as f64
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("rows");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = if a[i][i].abs() < 1e-300 { 0.0 } else { (b[i] - s) / a[i][i] };
    }
    x
}
