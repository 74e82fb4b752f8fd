use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine map `y = W x + b` with `W` stored `[out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Uniform fan-in initialisation with limit `sqrt(6 / fan_in)`.
    pub fn he_uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Fixed-topology multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub activations: Vec<Activation>,
}

/// Values retained by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

impl Mlp {
    /// ELU on every hidden layer, identity on the output layer.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers: Vec<DenseLayer> = sizes
            .windows(2)
            .map(|w| DenseLayer::he_uniform(w[0], w[1], rng))
            .collect();
        let n = layers.len();
        let activations = (0..n)
            .map(|i| if i + 1 == n { Activation::Identity } else { Activation::Elu })
            .collect();
        Self { layers, activations }
    }

    pub fn from_layers(layers: Vec<DenseLayer>, activations: Vec<Activation>) -> Result<Self> {
        if layers.len() != activations.len() || layers.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} layers but {} activations",
                layers.len(),
                activations.len()
            )));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} outputs {} but layer {} takes {}",
                    i,
                    w[0].outputs(),
                    i + 1,
                    w[1].inputs()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::ShapeMismatch("bias length differs from layer width".into()));
            }
        }
        Ok(Self { layers, activations })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs()));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
                .collect(),
            activations: self.activations.clone(),
        }
    }

    /// Batched forward pass over rows of `input` (`[batch × in]`).
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                actual: input.ncols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            let y = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre_activations.push(z);
            x = y;
        }
        Ok((x, MlpCache { inputs, pre_activations }))
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                actual: input.ncols(),
            });
        }
        let mut x = input.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            z.mapv_inplace(|v| act.apply(v));
            x = z;
        }
        Ok(x)
    }

    pub fn infer_vec(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.infer(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode gradients summed over the batch. Returns parameter
    /// gradients (shaped like `self`) and the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        output_gradient: ArrayView2<f64>,
    ) -> Result<(Mlp, Array2<f64>)> {
        let last = cache.pre_activations.last().expect("non-empty cache");
        if output_gradient.dim() != last.dim() || cache.inputs.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "mlp output gradient",
                expected: last.ncols(),
                actual: output_gradient.ncols(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_gradient.to_owned();
        for i in (0..self.layers.len()).rev() {
            let act = self.activations[i];
            let mut dz = upstream;
            if act != Activation::Identity {
                dz.zip_mut_with(&cache.pre_activations[i], |g, &z| *g *= act.derivative(z));
            }
            let dw = dz.t().dot(&cache.inputs[i]);
            let db = dz.sum_axis(Axis(0));
            upstream = dz.dot(&self.layers[i].weights);
            grads.push(DenseLayer { weights: dw, bias: db });
        }
        grads.reverse();
        Ok((
            Mlp {
                layers: grads,
                activations: self.activations.clone(),
            },
            upstream,
        ))
    }

    /// `self += scale · other`, parameter-wise.
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(scale, &b.weights);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flat parameter access: weights row-major then bias, layer by layer.
    pub fn param(&self, index: usize) -> f64 {
        let (l, slot) = self.locate(index);
        match slot {
            Slot::Weight(r, c) => self.layers[l].weights[[r, c]],
            Slot::Bias(r) => self.layers[l].bias[r],
        }
    }

    pub fn param_mut(&mut self, index: usize) -> &mut f64 {
        let (l, slot) = self.locate(index);
        match slot {
            Slot::Weight(r, c) => &mut self.layers[l].weights[[r, c]],
            Slot::Bias(r) => &mut self.layers[l].bias[r],
        }
    }

    pub fn param_label(&self, index: usize) -> String {
        let (l, slot) = self.locate(index);
        match slot {
            Slot::Weight(r, c) => format!("layer{l}.w[{r},{c}]"),
            Slot::Bias(r) => format!("layer{l}.b[{r}]"),
        }
    }

    /// Range of flat indices belonging to layer `layer`.
    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start: usize = self.layers[..layer].iter().map(|l| l.param_count()).sum();
        start..start + self.layers[layer].param_count()
    }

    fn locate(&self, mut index: usize) -> (usize, Slot) {
        for (l, layer) in self.layers.iter().enumerate() {
            let nw = layer.weights.len();
            if index < nw {
                let cols = layer.inputs();
                return (l, Slot::Weight(index / cols, index % cols));
            }
            index -= nw;
            if index < layer.bias.len() {
                return (l, Slot::Bias(index));
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }
}

enum Slot {
    Weight(usize, usize),
    Bias(usize),
}

/// Split the columns of a batch into `[.., 0..at)` and `[.., at..)`.
pub fn split_columns(m: &Array2<f64>, at: usize) -> (Array2<f64>, Array2<f64>) {
    (m.slice(s![.., ..at]).to_owned(), m.slice(s![.., at..]).to_owned())
}
