//! A small reverse-mode autodiff engine over dynamically shaped `f64`
//! `ndarray` tensors.
//!
//! Design constraints that ruled out the usual framework bindings:
//! single-threaded bit-for-bit determinism, native `f64` so finite-difference
//! gradient oracles are meaningful, and checkpoints that round-trip exactly.
//! The op set is exactly what the networks in this workspace need: conv2d,
//! group/instance normalization, spectral weight normalization, nearest
//! upsampling, concatenation, pointwise nonlinearities, and per-pixel
//! classification losses.
//!
//! Usage pattern: build a [`Tape`] per training step, bind parameters through
//! a [`params::Session`], compose ops from [`ops`], call [`Tape::backward`] on
//! a scalar loss, then hand the named gradients to an optimizer from
//! [`optim`].

pub mod init;
pub mod ops;
pub mod optim;
pub mod params;
pub mod serialize;
mod tape;

pub use params::{ParamStore, Session, SnState};
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TapeError>;
