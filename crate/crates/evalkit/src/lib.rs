//! Evaluation toolkit: distributional image-quality metrics over pluggable
//! feature extractors, the feature-leakage diagnostic (does the generator
//! just copy the pre-event image?), and per-level feature-norm maps.

mod extract;
mod leakage;
mod metrics;
mod normmap;
mod stats;

pub use extract::{FeatureExtractor, MomentsExtractor};
pub use leakage::{leakage_metric, LeakageReport};
pub use metrics::{fid, inception_score};
pub use normmap::feature_norm_map;
pub use stats::FeatureStats;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("feature dimensionality mismatch: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
    #[error("need at least one sample, got {0}")]
    TooFewSamples(usize),
    #[error("probability row {row} sums to {sum}, not 1")]
    NotAProbability { row: usize, sum: f64 },
    #[error("empty probability matrix")]
    EmptyProbs,
    #[error(transparent)]
    Core(#[from] changecore::CoreError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
