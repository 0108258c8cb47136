//! Fully connected classifier with softmax output.
//!
//! Weights of a layer are stored row-major as `fan_in x fan_out`, so the
//! pre-activation of unit `j` is `bias[j] + sum_i x[i] * weights[i * fan_out + j]`.
//! Inputs are sparse frequency vectors, which lets the first layer skip
//! zero rows.

mod predict;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::corpus::LabelMap;
use crate::features::FeatureVector;
use crate::hashing::derive_seed;
use crate::{ClassId, Scalar};

pub use predict::{argmax, predict, ranked, top_normalized, PredictError, Prediction, TOP_K};
pub(crate) use predict::{ascending_sum, predict_unchecked};
pub use train::{
    accuracy, adam_step, gradients, train, AdamState, EpochMetrics, TrainConfig, TrainError,
    TrainOutcome,
};

/// Probability floor inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("input has dimension {got}, the network expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output<T: Scalar>(self, h: T) -> T {
        match self {
            Activation::Relu => {
                if h > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - h * h,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub dropout_rate: f64,
    pub activation: Activation,
}

impl Architecture {
    /// Hidden widths 1000, 800, 700 and dropout 0.5.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Architecture {
            input_dim,
            hidden: vec![1000, 800, 700],
            output_dim,
            dropout_rate: 0.5,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::Architecture(m));
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return bad(format!("zero width in {:?}", self.widths()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    /// Input, hidden and output widths in order.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            fan_in,
            fan_out,
            weights: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[i * self.fan_out + j]
    }

    fn affine_dense(&self, x: &[T]) -> Vec<T> {
        let mut z = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (zj, &w) in z.iter_mut().zip(row) {
                *zj = *zj + xi * w;
            }
        }
        z
    }

    fn affine_sparse(&self, x: &[(usize, T)]) -> Vec<T> {
        let mut z = self.bias.clone();
        for &(i, xi) in x {
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (zj, &w) in z.iter_mut().zip(row) {
                *zj = *zj + xi * w;
            }
        }
        z
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Learned parameters bound to one vocabulary and label map.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    pub layers: Vec<Layer<T>>,
    pub architecture: Architecture,
    pub vocab_digest: String,
    pub label_map: LabelMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Sparse network input: `(feature index, value)` pairs in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub input: Vec<(usize, T)>,
    pub label: ClassId,
}

impl<T: Scalar> Example<T> {
    pub fn new(features: &FeatureVector, label: ClassId) -> Self {
        Example {
            input: sparse_input(features),
            label,
        }
    }

    /// `None` when the vector carries no label.
    pub fn from_features(features: &FeatureVector) -> Option<Self> {
        features.label.map(|l| Self::new(features, l))
    }
}

pub fn sparse_input<T: Scalar>(features: &FeatureVector) -> Vec<(usize, T)> {
    features.nonzeros().map(|(i, v)| (i, T::of(v))).collect()
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Activation output of each hidden layer, before dropout.
    pub hidden: Vec<Vec<T>>,
    /// Dropout multipliers per hidden layer (`0` or `1 / (1 - rate)`);
    /// empty when no dropout was applied.
    pub masks: Vec<Vec<T>>,
    pub probabilities: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Input that layer `k + 1` saw: hidden output `k` after dropout.
    fn layer_input(&self, k: usize) -> Vec<T> {
        match self.masks.get(k) {
            Some(mask) => self.hidden[k]
                .iter()
                .zip(mask)
                .map(|(&h, &m)| h * m)
                .collect(),
            None => self.hidden[k].clone(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Categorical cross-entropy against a one-hot label.
pub fn cross_entropy<T: Scalar>(probabilities: &[T], label: ClassId) -> T {
    -probabilities[label].max(T::of(PROB_FLOOR)).ln()
}

impl<T: Scalar> ModelParameters<T> {
    /// Fan-in scaled normal weights (variance `2 / fan_in`), zero biases.
    pub fn init(architecture: Architecture, seed: u64) -> Result<Self, NetworkError> {
        architecture.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "init", &[]));
        let widths = architecture.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                let weights = (0..fan_in * fan_out)
                    .map(|_| T::of(normal.sample(&mut rng)))
                    .collect();
                Layer {
                    fan_in,
                    fan_out,
                    weights,
                    bias: vec![T::zero(); fan_out],
                }
            })
            .collect();
        Ok(ModelParameters {
            layers,
            architecture,
            vocab_digest: String::new(),
            label_map: LabelMap::default(),
        })
    }

    pub fn bind(mut self, vocab_digest: impl Into<String>, label_map: LabelMap) -> Self {
        self.vocab_digest = vocab_digest.into();
        self.label_map = label_map;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.architecture.output_dim
    }

    /// Shapes chain from input to output and every value is finite.
    pub fn check(&self) -> Result<(), NetworkError> {
        self.architecture.validate()?;
        let widths = self.architecture.widths();
        if self.layers.len() != widths.len() - 1 {
            return Err(NetworkError::Architecture("layer count".into()));
        }
        for (layer, w) in self.layers.iter().zip(widths.windows(2)) {
            if layer.fan_in != w[0]
                || layer.fan_out != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.bias.len() != w[1]
            {
                return Err(NetworkError::Architecture(
                    "layer shapes do not chain".into(),
                ));
            }
            if !layer.all_finite() {
                return Err(NetworkError::Architecture("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    /// Forward pass over a dense feature vector.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &FeatureVector,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardCache<T>, NetworkError> {
        if x.dimension() != self.input_dim() {
            return Err(NetworkError::Dimension {
                expected: self.input_dim(),
                got: x.dimension(),
            });
        }
        Ok(self.forward_sparse(&sparse_input(x), mode, rng))
    }

    /// Forward pass over a sparse input. Indices must be below `input_dim`.
    pub fn forward_sparse<R: Rng + ?Sized>(
        &self,
        x: &[(usize, T)],
        mode: Mode,
        rng: &mut R,
    ) -> ForwardCache<T> {
        let rate = self.architecture.dropout_rate;
        let drop = mode == Mode::Train && rate > 0.0;
        let keep_scale = T::of(1.0 / (1.0 - rate));
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let mut masks = Vec::new();
        let mut current: Option<Vec<T>> = None;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = match &current {
                None => layer.affine_sparse(x),
                Some(a) => layer.affine_dense(a),
            };
            if k == last {
                return ForwardCache {
                    hidden,
                    masks,
                    probabilities: softmax(&z),
                };
            }
            let act = self.architecture.activation;
            let h: Vec<T> = z.into_iter().map(|v| act.apply(v)).collect();
            let next = if drop {
                let mask: Vec<T> = (0..h.len())
                    .map(|_| {
                        if rng.random::<f64>() < rate {
                            T::zero()
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                let out = h.iter().zip(&mask).map(|(&a, &m)| a * m).collect();
                masks.push(mask);
                out
            } else {
                h.clone()
            };
            hidden.push(h);
            current = Some(next);
        }
        unreachable!("a network has at least one layer")
    }

    /// Class probabilities without dropout.
    pub fn probabilities(&self, x: &[(usize, T)]) -> Vec<T> {
        // inference draws no random numbers
        self.forward_sparse(x, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(0))
            .probabilities
    }

    /// Gradient of the loss of one example, added into `grads`.
    pub(crate) fn accumulate_gradient(
        &self,
        x: &[(usize, T)],
        label: ClassId,
        cache: &ForwardCache<T>,
        grads: &mut [Layer<T>],
    ) {
        let mut delta: Vec<T> = cache.probabilities.clone();
        delta[label] = delta[label] - T::one();
        let act = self.architecture.activation;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads[k];
            for (gb, &d) in g.bias.iter_mut().zip(&delta) {
                *gb = *gb + d;
            }
            if k == 0 {
                for &(i, xi) in x {
                    let row = &mut g.weights[i * g.fan_out..(i + 1) * g.fan_out];
                    for (gw, &d) in row.iter_mut().zip(&delta) {
                        *gw = *gw + xi * d;
                    }
                }
                break;
            }
            let input = cache.layer_input(k - 1);
            let mut back = vec![T::zero(); layer.fan_in];
            for (i, &ai) in input.iter().enumerate() {
                let row = i * layer.fan_out..(i + 1) * layer.fan_out;
                let mut acc = T::zero();
                for ((gw, &w), &d) in g.weights[row.clone()]
                    .iter_mut()
                    .zip(&layer.weights[row])
                    .zip(&delta)
                {
                    if ai != T::zero() {
                        *gw = *gw + ai * d;
                    }
                    acc = acc + w * d;
                }
                back[i] = acc;
            }
            let h = &cache.hidden[k - 1];
            let mask = cache.masks.get(k - 1);
            delta = back
                .into_iter()
                .enumerate()
                .map(|(i, b)| {
                    let b = mask.map_or(b, |m| b * m[i]);
                    b * act.derivative_from_output(h[i])
                })
                .collect();
        }
    }
}
