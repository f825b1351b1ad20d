//! Synthetic change-dataset production. A trained generator plus the event
//! simulator turn every pre-event pair into an `n`-step chain of bitemporal
//! samples with exact change labels and persisted event logs.

mod pipeline;
mod stitch;

pub use pipeline::{generate_dataset, sample_scp, ConditionMode, GenerateReport};
pub use stitch::{crop_back, pad_to_multiple, synthesize_large, tiled_vs_whole_diff, SynthMode};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("generator checkpoint is untrained (iteration 0); train it before generating")]
    Untrained,
    #[error("chain length n must be at least 1")]
    EmptyChain,
    #[error("tile size {0} must be a positive multiple of 32")]
    BadTile(usize),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] changecore::CoreError),
    #[error(transparent)]
    Events(#[from] eventsim::EventSimError),
    #[error(transparent)]
    Gen(#[from] gennet::GennetError),
}

impl DatagenError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        DatagenError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DatagenError>;
