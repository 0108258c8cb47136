//! Backpropagation, Adam and the epoch loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::predict::argmax;
use super::{cross_entropy, Architecture, Example, Layer, Mode, ModelParameters, NetworkError};
use crate::hashing::derive_seed;
use crate::Scalar;

/// Examples per gradient work unit. Partial sums are always added in chunk
/// order, so results do not depend on the number of threads.
const CHUNK: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("gradient batch is empty")]
    EmptyBatch,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("example {index}: {reason}")]
    Example { index: usize, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 8,
            batch_size: 128,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

fn zeros_like<T: Scalar>(params: &ModelParameters<T>) -> Vec<Layer<T>> {
    params
        .layers
        .iter()
        .map(|l| Layer::zeros(l.fan_in, l.fan_out))
        .collect()
}

fn add_into<T: Scalar>(acc: &mut [Layer<T>], other: &[Layer<T>]) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, &y) in a.weights.iter_mut().zip(&b.weights) {
            *x = *x + y;
        }
        for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
            *x = *x + y;
        }
    }
}

fn batch_gradients<T: Scalar>(
    params: &ModelParameters<T>,
    batch: &[&Example<T>],
    dropout_seed: u64,
) -> (Vec<Layer<T>>, T) {
    let partials: Vec<(Vec<Layer<T>>, T)> = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut grads = zeros_like(params);
            let mut loss = T::zero();
            for (k, ex) in chunk.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
                rng.set_stream((c * CHUNK + k) as u64);
                let cache = params.forward_sparse(&ex.input, Mode::Train, &mut rng);
                loss = loss + cross_entropy(&cache.probabilities, ex.label);
                params.accumulate_gradient(&ex.input, ex.label, &cache, &mut grads);
            }
            (grads, loss)
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut grads, mut loss) = iter.next().expect("non-empty batch");
    for (g, l) in iter {
        add_into(&mut grads, &g);
        loss = loss + l;
    }
    let scale = T::one() / T::of_count(batch.len() as u64);
    for layer in &mut grads {
        layer
            .weights
            .iter_mut()
            .chain(layer.bias.iter_mut())
            .for_each(|v| *v = *v * scale);
    }
    (grads, loss * scale)
}

/// Mean gradient of the batch cross-entropy, and the mean loss.
///
/// Example `i` of the batch draws its dropout masks from stream `i` of a
/// generator seeded with `dropout_seed`.
pub fn gradients<T: Scalar>(
    params: &ModelParameters<T>,
    batch: &[Example<T>],
    dropout_seed: u64,
) -> Result<(Vec<Layer<T>>, T), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    check_examples(params, batch.iter())?;
    let refs: Vec<&Example<T>> = batch.iter().collect();
    Ok(batch_gradients(params, &refs, dropout_seed))
}

fn check_examples<'a, T: Scalar>(
    params: &ModelParameters<T>,
    examples: impl Iterator<Item = &'a Example<T>>,
) -> Result<(), TrainError> {
    for (index, ex) in examples.enumerate() {
        if ex.label >= params.output_dim() {
            return Err(TrainError::Example {
                index,
                reason: format!("label {} out of range", ex.label),
            });
        }
        if ex.input.iter().any(|&(i, _)| i >= params.input_dim()) {
            return Err(TrainError::Example {
                index,
                reason: "feature index out of range".into(),
            });
        }
    }
    Ok(())
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<Layer<T>>,
    pub second: Vec<Layer<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParameters<T>) -> Self {
        AdamState {
            first: zeros_like(params),
            second: zeros_like(params),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParameters<T>,
    grads: &[Layer<T>],
    state: &mut AdamState<T>,
    config: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::of(config.adam_beta1);
    let b2 = T::of(config.adam_beta2);
    let lr = T::of(config.learning_rate);
    let eps = T::of(config.adam_epsilon);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (k, layer) in params.layers.iter_mut().enumerate() {
        let (g, m, v) = (&grads[k], &mut state.first[k], &mut state.second[k]);
        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        update(
            &mut layer.weights,
            &g.weights,
            &mut m.weights,
            &mut v.weights,
        );
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training cross-entropy over the epoch, with dropout active.
    pub train_loss: f64,
    /// `None` when there is no validation data.
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParameters<T>,
    pub log: Vec<EpochMetrics>,
}

/// Share of examples whose argmax matches the label.
pub fn accuracy<T: Scalar>(params: &ModelParameters<T>, examples: &[Example<T>]) -> Option<f64> {
    if examples.is_empty() {
        return None;
    }
    let correct: usize = examples
        .par_iter()
        .map(|ex| usize::from(argmax(&params.probabilities(&ex.input)) == ex.label))
        .sum();
    Some(correct as f64 / examples.len() as f64)
}

/// Train from a seeded initialization for a fixed number of epochs.
///
/// The training set is reshuffled every epoch; there is no early stopping.
pub fn train<T: Scalar>(
    architecture: Architecture,
    train_set: &[Example<T>],
    validation: &[Example<T>],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let mut params = ModelParameters::init(architecture, config.seed)?;
    check_examples(&params, train_set.iter().chain(validation))?;
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "shuffle", &[epoch as u64]));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example<T>> = idx.iter().map(|&i| &train_set[i]).collect();
            let dropout_seed = derive_seed(config.seed, "dropout", &[epoch as u64, b as u64]);
            let (grads, loss) = batch_gradients(&params, &batch, dropout_seed);
            loss_sum += loss.to_f64_lossy() * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, config);
        }
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            validation_accuracy: accuracy(&params, validation),
        };
        log::info!(
            "epoch {} loss {:.6} validation accuracy {:?}",
            metrics.epoch,
            metrics.train_loss,
            metrics.validation_accuracy
        );
        log.push(metrics);
    }
    Ok(TrainOutcome { params, log })
}
