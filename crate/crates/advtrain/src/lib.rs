//! Adversarial training of the change generator.
//!
//! The discriminator is a segmentation-shaped U-Net scoring every pixel over
//! `C + 1` classes (the extra class marks fakes). Because no ground-truth
//! post-event image exists, the discriminator's real target is always the
//! time-t pair; the training interfaces consume a single-temporal dataset
//! only, so a ground-truth post-event image cannot even be expressed.

mod augment;
mod discriminator;
mod losses;
mod train;

pub use augment::{augment, color_jitter, hflip, random_crop, resize_pair, rot90, transpose, vflip};
pub use discriminator::{discriminate, DiscriminatorConfig, DiscriminatorNet, DiscriminatorParams};
pub use losses::{class_weights, d_loss, fake_class_index, g_loss};
pub use train::{
    assemble_batch, train, train_step, LossRecord, StepReport, TrainBatch, TrainOutputs,
    TrainState, UpdateKind,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdvTrainError {
    #[error("non-finite loss at step {step}: g_loss {g_loss}, d_loss {d_loss}")]
    NonFinite { step: u64, g_loss: f64, d_loss: f64 },
    #[error("crop {crop} exceeds input {h}x{w}")]
    CropTooLarge { crop: usize, h: usize, w: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
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
    #[error(transparent)]
    Tape(#[from] tapegrad::TapeError),
}

impl AdvTrainError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        AdvTrainError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, AdvTrainError>;
