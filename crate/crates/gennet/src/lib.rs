//! The change generator network: synthesizes the post-event image from the
//! post-event mask, the pre-event image and mask, and a Gaussian noise map.
//!
//! Structure: a U-Net image encoder over a residual backbone produces a
//! six-level feature pyramid of the pre-event image; masked transition
//! layers turn (pre-event features, decoder features, both masks) into
//! per-level change fields; a conditional decoder of six residual blocks
//! with spatially-adaptive group normalization accumulates those change
//! fields and ends in a tanh image head. Everything is fully convolutional:
//! parameters trained at one resolution apply to any input divisible by 32.

mod cond;
mod config;
mod net;
mod ops;
mod params;
mod pyramid;

pub use cond::CondLevels;
pub use config::GeneratorConfig;
pub use net::{GeneratorNet, SynthesisTrace};
pub use ops::{
    decode_step, destyle, destyle_stages, encode_image, level_spatial, masked_transition, masking,
    synthesize, synthesize_with_trace,
};
pub use params::GeneratorParams;
pub use pyramid::{expected_level_shapes, ChangeField, FeaturePyramid, LEVELS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GennetError {
    #[error("input {h}x{w} is not divisible by 32; pad or tile the input first")]
    Indivisible { h: usize, w: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("pyramid level {0} out of range (0..6)")]
    LevelOutOfRange(usize),
    #[error("mask class count {mask} does not match configured {config}")]
    ClassCount { mask: u16, config: u16 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] changecore::CoreError),
    #[error(transparent)]
    Tape(#[from] tapegrad::TapeError),
}

pub type Result<T> = std::result::Result<T, GennetError>;
