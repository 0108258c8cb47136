use thiserror::Error;

use super::{ModelParameters, NetworkError};
use crate::features::{featurize, FeatureError};
use crate::vocabulary::Vocabulary;
use crate::{ClassId, Scalar};

/// Number of ranked alternatives kept with every prediction.
pub const TOP_K: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredictError {
    #[error("vocabulary {found} does not match the model's vocabulary {expected}")]
    VocabMismatch { expected: String, found: String },
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> ClassId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Classes by descending probability, lowest id first among equals.
pub fn ranked<T: Scalar>(probabilities: &[T]) -> Vec<(ClassId, T)> {
    let mut r: Vec<(ClassId, T)> = probabilities.iter().copied().enumerate().collect();
    r.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    r
}

/// Sum from the smallest value up.
pub(crate) fn ascending_sum<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let mut v: Vec<T> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.into_iter().sum()
}

/// The `k` most probable classes with their probabilities rescaled to sum
/// to one. Fewer than `k` classes are returned when fewer exist.
pub fn top_normalized<T: Scalar>(probabilities: &[T], k: usize) -> Vec<(ClassId, T)> {
    let mut top = ranked(probabilities);
    top.truncate(k);
    let total = ascending_sum(top.iter().map(|&(_, p)| p));
    if total > T::zero() {
        for (_, p) in &mut top {
            *p = *p / total;
        }
    }
    top
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub probabilities: Vec<T>,
    pub predicted: ClassId,
    /// Top five classes with normalized probabilities.
    pub top5: Vec<(ClassId, T)>,
}

impl<T: Scalar> Prediction<T> {
    pub fn from_probabilities(probabilities: Vec<T>) -> Self {
        let predicted = argmax(&probabilities);
        let top5 = top_normalized(&probabilities, TOP_K);
        Prediction {
            probabilities,
            predicted,
            top5,
        }
    }

    pub fn probability(&self) -> T {
        self.probabilities[self.predicted]
    }

    /// Top `k` classes with raw probabilities.
    pub fn top_raw(&self, k: usize) -> Vec<(ClassId, T)> {
        let mut r = ranked(&self.probabilities);
        r.truncate(k);
        r
    }

    pub fn top_normalized(&self, k: usize) -> Vec<(ClassId, T)> {
        top_normalized(&self.probabilities, k)
    }
}

/// Classify raw file content. The full token stream is used.
pub fn predict<T: Scalar>(
    params: &ModelParameters<T>,
    content: &[u8],
    vocab: &Vocabulary,
) -> Result<Prediction<T>, PredictError> {
    let found = vocab.digest();
    if found != params.vocab_digest {
        return Err(PredictError::VocabMismatch {
            expected: params.vocab_digest.clone(),
            found,
        });
    }
    predict_unchecked(params, content, vocab)
}

/// [`predict`] for callers that already verified the vocabulary binding.
pub(crate) fn predict_unchecked<T: Scalar>(
    params: &ModelParameters<T>,
    content: &[u8],
    vocab: &Vocabulary,
) -> Result<Prediction<T>, PredictError> {
    let x = featurize(content, vocab)?;
    if x.dimension() != params.input_dim() {
        return Err(NetworkError::Dimension {
            expected: params.input_dim(),
            got: x.dimension(),
        }
        .into());
    }
    Ok(Prediction::from_probabilities(
        params.probabilities(&super::sparse_input(&x)),
    ))
}
