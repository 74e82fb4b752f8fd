use serde::{Deserialize, Serialize};

use crate::neural::mlp::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Mlp,
    second: Mlp,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &Mlp) -> Self {
        Self {
            config,
            step: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp) {
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            };
            ndarray::Zip::from(&mut p.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }

    pub fn second_moments_nonnegative(&self) -> bool {
        self.second
            .layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| *v >= 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{Activation, DenseLayer};
    use ndarray::array;

    fn scalar(w: f64) -> Mlp {
        Mlp::from_layers(
            vec![DenseLayer { weights: array![[w]], bias: array![0.0] }],
            vec![Activation::Identity],
        )
        .unwrap()
    }

    fn grad(g: f64) -> Mlp {
        Mlp::from_layers(
            vec![DenseLayer { weights: array![[g]], bias: array![0.0] }],
            vec![Activation::Identity],
        )
        .unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.3, -7.0, 1e-3] {
            let mut p = scalar(1.0);
            let mut adam = AdamState::new(AdamConfig::default(), &p);
            adam.step(&mut p, &grad(g));
            let moved = (p.layers[0].weights[[0, 0]] - 1.0).abs();
            let expected = 1e-3 * g.abs() / (g.abs() + 1e-8);
            assert!((moved - expected).abs() < 1e-12);
            assert_eq!(adam.step, 1);
        }
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut p = scalar(0.7);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        for _ in 0..50 {
            adam.step(&mut p, &grad(0.0));
        }
        assert_eq!(p.layers[0].weights[[0, 0]], 0.7);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut p = scalar(1.0);
        let config = AdamConfig { learning_rate: 0.1, ..Default::default() };
        let mut adam = AdamState::new(config, &p);
        for _ in 0..100 {
            let w = p.layers[0].weights[[0, 0]];
            adam.step(&mut p, &grad(2.0 * w));
        }
        assert!(p.layers[0].weights[[0, 0]].abs() < 0.1);
        assert!(adam.second_moments_nonnegative());
    }
}
