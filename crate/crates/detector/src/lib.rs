//! A compact Siamese change detector in the multi-task style: a shared
//! residual encoder with a small fusion neck, per-time semantic segmentation
//! heads, and a change head that consumes bitemporal feature concatenations
//! in both temporal orders through the same weights. Inference averages both
//! orders, so the change map is exactly order-invariant.

mod metrics;
mod net;
mod train;

pub use metrics::{metrics_from_counts, ChangeMetrics};
pub use net::{detect, DetectorConfig, DetectorNet, DetectorParams, Detection};
pub use train::{evaluate, fine_tune, pretrain, subset_indices, PretrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("subset ratio {ratio} yields zero samples out of {total}")]
    EmptySubset { ratio: f64, total: usize },
    #[error("images are misaligned: {a:?} vs {b:?}")]
    Misaligned { a: (usize, usize), b: (usize, usize) },
    #[error("input {h}x{w} must be divisible by 8")]
    Indivisible { h: usize, w: usize },
    #[error("non-finite loss at step {0}")]
    NonFinite(u64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] changecore::CoreError),
    #[error(transparent)]
    Augment(#[from] advtrain::AdvTrainError),
    #[error(transparent)]
    Tape(#[from] tapegrad::TapeError),
}

pub type Result<T> = std::result::Result<T, DetectorError>;
