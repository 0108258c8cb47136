//! Content-based file-type detection.
//!
//! Files are tokenized into words, punctuation and whitespace runs, mapped to
//! unigram and bigram frequency vectors over a learned vocabulary, and
//! classified by a fully connected network. The numeric core is generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix it to one of them.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod confusion;
pub mod corpus;
pub mod escape;
pub mod features;
pub mod hashing;
pub mod metrics;
pub mod network;
pub mod run;
pub mod scalar;
pub mod tokenizer;
pub mod vocabulary;

pub use scalar::Scalar;

/// Dense class index into a [`corpus::LabelMap`].
pub type ClassId = usize;

pub type Params = network::ModelParameters<f64>;
pub type ParamsF32 = network::ModelParameters<f32>;
pub type Model = artifact::Model<f64>;
pub type ModelF32 = artifact::Model<f32>;
pub type Report = metrics::EvaluationReport<f64>;
pub type Stats = confusion::ConfusionStats<f64>;
