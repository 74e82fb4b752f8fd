//! Training objective with hand-derived gradients.
//!
//! Per sample: mean squared error over all `(M+1)·D` predicted normalised
//! features, plus `β` times the KL divergence to `N(0, I)` summed over
//! latent dimensions, and `γ` times the binary cross-entropy summed over the
//! `J×4` contact entries. Batch values are averaged over samples.

use ndarray::{concatenate, s, Array2, Axis};

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::neural::{gradient_check, FlatParams, GradCheckReport};
use crate::vae::config::{ModelConfig, ACTION_DIM};
use crate::vae::model::{sigmoid, VaeNetworks};

/// One minibatch, already normalised.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub actions: Array2<f64>,
    pub targets: Array2<f64>,
    /// Contact truth as 0/1, `[batch × J·4]`.
    pub contacts: Array2<f64>,
    /// Reparameterisation noise, `[batch × d_z]`.
    pub noise: Array2<f64>,
}

const BATCH_STREAM: u64 = 1;
const COORDINATE_STREAM: u64 = 2;

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Synthetic batch with inputs in `[-1.5, 1.5)`, actions in `[-0.4, 0.4)`,
    /// targets and noise in `[-1, 1)` and random 0/1 contacts.
    ///
    /// Draws from its own ChaCha stream, so a batch is independent of
    /// networks initialised from the same seed.
    pub fn random(config: &ModelConfig, rows: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(BATCH_STREAM);
        let mut m = |c: usize, lo: f64, hi: f64| Array2::from_shape_fn((rows, c), |_| rng.random_range(lo..hi));
        Batch {
            inputs: m(config.encoder_input_dim(), -1.5, 1.5),
            actions: m(ACTION_DIM, -0.4, 0.4),
            targets: m(config.decoder_output_dim(), -1.0, 1.0),
            contacts: m(config.contact_output_dim(), 0.0, 1.0).mapv(|v| if v > 0.5 { 1.0 } else { 0.0 }),
            noise: m(config.latent_dim, -1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub bce: f64,
}

impl LossBreakdown {
    pub fn elbo(&self, beta: f64) -> f64 {
        self.reconstruction + beta * self.kl
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.reconstruction.is_finite() && self.kl.is_finite() && self.bce.is_finite()
    }
}

/// Weight applied to the summed squared reconstruction error, turning it
/// into a mean over every predicted element: `1 / ((M+1)·D)`.
pub fn reconstruction_scale(config: &ModelConfig) -> f64 {
    1.0 / ((config.horizon + 1) * config.state_dim) as f64
}

/// Numerically stable `BCE(σ(logit), truth)`.
pub fn bce_with_logit(logit: f64, truth: f64) -> f64 {
    logit.max(0.0) - logit * truth + (-logit.abs()).exp().ln_1p()
}

fn check_batch(config: &ModelConfig, batch: &Batch) -> Result<()> {
    let b = batch.len();
    let checks = [
        ("batch inputs", batch.inputs.ncols(), config.encoder_input_dim(), batch.inputs.nrows()),
        ("batch actions", batch.actions.ncols(), 3, batch.actions.nrows()),
        ("batch targets", batch.targets.ncols(), config.decoder_output_dim(), batch.targets.nrows()),
        ("batch contacts", batch.contacts.ncols(), config.contact_output_dim(), batch.contacts.nrows()),
        ("batch noise", batch.noise.ncols(), config.latent_dim, batch.noise.nrows()),
    ];
    for (context, actual, expected, rows) in checks {
        if actual != expected {
            return Err(Error::DimensionMismatch { context, expected, actual });
        }
        if rows != b {
            return Err(Error::DimensionMismatch { context, expected: b, actual: rows });
        }
    }
    if b == 0 {
        return Err(Error::DimensionMismatch { context: "batch size", expected: 1, actual: 0 });
    }
    Ok(())
}

/// `L = recon + β·KL + γ·BCE` and its gradients w.r.t. every network parameter.
pub fn total_loss(
    networks: &VaeNetworks,
    config: &ModelConfig,
    batch: &Batch,
    beta: f64,
    gamma: f64,
) -> Result<(LossBreakdown, VaeNetworks)> {
    check_batch(config, batch)?;
    let b = batch.len() as f64;
    let dz = config.latent_dim;

    let (enc_out, enc_cache) = networks.encoder.forward(batch.inputs.view())?;
    let mean = enc_out.slice(s![.., ..dz]).to_owned();
    let log_var = enc_out.slice(s![.., dz..]).to_owned();
    let std = log_var.mapv(|lv| (0.5 * lv).exp());
    let z = &mean + &(&std * &batch.noise);

    let dec_in = concatenate(Axis(1), &[z.view(), batch.actions.view()]).expect("matching rows");
    let (pred, dec_cache) = networks.decoder.forward(dec_in.view())?;
    let residual = &pred - &batch.targets;
    let rs = reconstruction_scale(config);
    let reconstruction = rs * residual.iter().map(|r| r * r).sum::<f64>() / b;

    let (logits, pp_cache) = networks.predictor.forward(z.view())?;
    let bce = logits
        .iter()
        .zip(batch.contacts.iter())
        .map(|(&l, &t)| bce_with_logit(l, t))
        .sum::<f64>()
        / b;

    let kl = 0.5
        * mean
            .iter()
            .zip(log_var.iter())
            .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
            .sum::<f64>()
        / b;

    let breakdown = LossBreakdown {
        total: reconstruction + beta * kl + gamma * bce,
        reconstruction,
        kl,
        bce,
    };

    let d_pred = residual.mapv(|r| 2.0 * rs * r / b);
    let (dec_grads, d_dec_in) = networks.decoder.backward(&dec_cache, d_pred.view())?;

    let mut d_logits = logits.clone();
    ndarray::Zip::from(&mut d_logits)
        .and(&batch.contacts)
        .for_each(|g, &t| *g = gamma * (sigmoid(*g) - t) / b);
    let (pp_grads, dz_pp) = networks.predictor.backward(&pp_cache, d_logits.view())?;

    let dz_total = &d_dec_in.slice(s![.., ..dz]) + &dz_pp;

    let mut d_enc = Array2::zeros(enc_out.dim());
    for r in 0..batch.len() {
        for c in 0..dz {
            let g = dz_total[[r, c]];
            let (m, lv, sd, e) = (mean[[r, c]], log_var[[r, c]], std[[r, c]], batch.noise[[r, c]]);
            d_enc[[r, c]] = g + beta * m / b;
            d_enc[[r, dz + c]] = g * e * 0.5 * sd + beta * 0.5 * (lv.exp() - 1.0) / b;
        }
    }
    let (enc_grads, _) = networks.encoder.backward(&enc_cache, d_enc.view())?;

    Ok((
        breakdown,
        VaeNetworks {
            encoder: enc_grads,
            decoder: dec_grads,
            predictor: pp_grads,
        },
    ))
}

/// ELBO-only objective: the contact predictor receives no gradient.
pub fn elbo_loss(
    networks: &VaeNetworks,
    config: &ModelConfig,
    batch: &Batch,
    beta: f64,
) -> Result<(LossBreakdown, VaeNetworks)> {
    total_loss(networks, config, batch, beta, 0.0)
}

/// Loss value only, for finite-difference checks.
pub fn total_loss_value(networks: &VaeNetworks, config: &ModelConfig, batch: &Batch, beta: f64, gamma: f64) -> f64 {
    let dz = config.latent_dim;
    let enc_out = networks.encoder.infer(batch.inputs.view()).expect("shape");
    let mean = enc_out.slice(s![.., ..dz]);
    let log_var = enc_out.slice(s![.., dz..]);
    let z = &mean + &(&log_var.mapv(|lv| (0.5 * lv).exp()) * &batch.noise);
    let dec_in = concatenate(Axis(1), &[z.view(), batch.actions.view()]).expect("rows");
    let pred = networks.decoder.infer(dec_in.view()).expect("shape");
    let logits = networks.predictor.infer(z.view()).expect("shape");
    let b = batch.len() as f64;
    let recon = (&pred - &batch.targets).iter().map(|r| r * r).sum::<f64>();
    let kl = 0.5 * mean.iter().zip(log_var.iter()).map(|(m, lv)| m * m + lv.exp() - 1.0 - lv).sum::<f64>();
    let bce = logits.iter().zip(batch.contacts.iter()).map(|(&l, &t)| bce_with_logit(l, t)).sum::<f64>();
    (reconstruction_scale(config) * recon + beta * kl + gamma * bce) / b
}

/// Central-difference check of [`total_loss`] gradients at `per_layer`
/// random coordinates of every layer of all three networks.
pub fn check_loss_gradients(
    networks: &VaeNetworks,
    config: &ModelConfig,
    batch: &Batch,
    per_layer: usize,
    step: f64,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grads) = total_loss(networks, config, batch, config.beta, config.gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(COORDINATE_STREAM);
    let mut coords = Vec::new();
    for (n, net) in [&networks.encoder, &networks.decoder, &networks.predictor].into_iter().enumerate() {
        let mut start = networks.network_offset(n);
        for layer in &net.layers {
            let count = layer.param_count();
            coords.extend((0..per_layer.min(count)).map(|_| start + rng.random_range(0..count)));
            start += count;
        }
    }
    debug_assert!(coords.iter().all(|&c| c < networks.param_count()));
    Ok(gradient_check(networks, &grads, &coords, step, tolerance, |n| {
        total_loss_value(n, config, batch, config.beta, config.gamma)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig {
            window_len: 3,
            horizon: 2,
            contact_steps: 2,
            latent_dim: 6,
            hidden_width: 7,
            hidden_layers: 2,
            control_hz: 100.0,
            encoder_hz: 50.0,
            ..ModelConfig::desk_scale()
        }
    }

    #[test]
    fn bce_at_half_is_ln2() {
        assert!((bce_with_logit(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_with_logit(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_with_logit(40.0, 1.0) < 1e-15);
    }

    #[test]
    fn value_function_agrees_with_breakdown() {
        let config = small_config();
        let nets = VaeNetworks::new(&config, 1);
        let batch = Batch::random(&config, 4, 2);
        let (l, _) = total_loss(&nets, &config, &batch, 1.0, 0.5).unwrap();
        let v = total_loss_value(&nets, &config, &batch, 1.0, 0.5);
        assert!((l.total - v).abs() < 1e-12 * v.abs());
    }

    #[test]
    fn full_loss_gradients_match_finite_differences() {
        let config = small_config();
        let nets = VaeNetworks::new(&config, 5);
        let batch = Batch::random(&config, 3, 6);
        let (_, grads) = total_loss(&nets, &config, &batch, 1.0, 0.5).unwrap();
        let coords: Vec<usize> = (0..nets.param_count()).step_by(3).collect();
        let report = gradient_check(&nets, &grads, &coords, 1e-5, 1e-4, |n| {
            total_loss_value(n, &config, &batch, 1.0, 0.5)
        });
        assert!(report.passed(), "max {} {:?}", report.max_relative_error(), report.failures().next());
    }

    #[test]
    fn shared_seed_still_checks_cleanly() {
        let config = ModelConfig::desk_scale();
        for seed in 0..6 {
            let nets = VaeNetworks::new(&config, seed);
            let batch = Batch::random(&config, 4, seed);
            let r = check_loss_gradients(&nets, &config, &batch, 10, 1e-5, 1e-4, seed).unwrap();
            assert!(r.passed(), "seed {seed}: {:?}", r.failures().next());
        }
    }

    #[test]
    fn per_layer_check_covers_every_layer() {
        let config = small_config();
        let nets = VaeNetworks::new(&config, 12);
        let batch = Batch::random(&config, 3, 13);
        let report = check_loss_gradients(&nets, &config, &batch, 10, 1e-5, 1e-4, 14).unwrap();
        let layers = nets.encoder.layers.len() + nets.decoder.layers.len() + nets.predictor.layers.len();
        assert_eq!(report.entries.len(), 10 * layers);
        assert!(report.passed(), "max {}", report.max_relative_error());
    }

    #[test]
    fn elbo_gives_predictor_no_gradient() {
        let config = small_config();
        let nets = VaeNetworks::new(&config, 8);
        let batch = Batch::random(&config, 2, 9);
        let (_, g) = elbo_loss(&nets, &config, &batch, 1.0).unwrap();
        assert!(g.predictor.layers.iter().all(|l| l.weights.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn contact_loss_reaches_encoder() {
        let config = small_config();
        let nets = VaeNetworks::new(&config, 10);
        let batch = Batch::random(&config, 4, 11);
        let (_, without) = total_loss(&nets, &config, &batch, 1.0, 0.0).unwrap();
        let (_, with) = total_loss(&nets, &config, &batch, 1.0, 0.5).unwrap();
        let diff: f64 = without.encoder.layers[0]
            .weights
            .iter()
            .zip(with.encoder.layers[0].weights.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn rejects_misshapen_batch() {
        let config = small_config();
        let nets = VaeNetworks::new(&config, 1);
        let mut batch = Batch::random(&config, 2, 3);
        batch.noise = Array2::zeros((2, 5));
        assert!(matches!(
            total_loss(&nets, &config, &batch, 1.0, 0.5),
            Err(Error::DimensionMismatch { context: "batch noise", .. })
        ));
    }
}
