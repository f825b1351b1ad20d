//! Stochastic change-event simulation on semantic masks.
//!
//! The semantic transition from time t to t+1 is approximated by two
//! learning-free edits: removing existing object instances (assigning them
//! the background label) and creating new ones (pasting instance footprints
//! onto free background). Events are logged with their exact transformed
//! pixel sets, so `(mask_t, events)` always replays to `mask_t1` bit-exactly,
//! and chains are Markov by construction: each step consumes only the
//! previous mask.

mod extract;
mod labels;
mod simulate;
mod transform;

pub use changecore::{
    BBox, ChangeEvent, ChangeEventKind, EventConfig, EventLog, Instance, Placement, Rotation,
    SkippedPlacement,
};
pub use extract::extract_instances;
pub use labels::{derive_change_label, replay_events};
pub use simulate::{simulate_chain, simulate_create, simulate_event, simulate_remove};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventSimError {
    #[error("cannot remove {requested} instances, only {available} present")]
    RemoveCount { requested: usize, available: usize },
    #[error("create requested with an empty instance pool")]
    EmptyPool,
    #[error("mask shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },
    #[error(transparent)]
    Core(#[from] changecore::CoreError),
}

pub type Result<T> = std::result::Result<T, EventSimError>;
