use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the workspace's data layer.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("mask label {label} at ({row}, {col}) is not below class count {class_count}")]
    LabelOutOfRange {
        label: u8,
        class_count: u16,
        row: usize,
        col: usize,
    },

    #[error("class count must be at least 2, got {0}")]
    ClassCount(u16),

    #[error("spatial dimensions must be at least 1x1, got {height}x{width}")]
    EmptySpatial { height: usize, width: usize },

    #[error("image value {value} at {index:?} is outside [-1, 1] or not finite")]
    ImageOutOfRange { value: f64, index: [usize; 3] },

    #[error("expected a 3-channel image, got {channels} channels")]
    ChannelCount { channels: usize },

    #[error("spatial shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },

    #[error("tile size {size} exceeds input {height}x{width}")]
    TileTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },

    #[error("tile size and stride must be positive")]
    TileParams,

    #[error("dataset item `{id}`: missing file {path}")]
    MissingFile { id: String, path: PathBuf },

    #[error("dataset item `{id}`: image is {image:?} but mask is {mask:?}")]
    PairSizeMismatch {
        id: String,
        image: (usize, usize),
        mask: (usize, usize),
    },

    #[error("duplicate id `{0}` in manifest")]
    DuplicateId(String),

    #[error("manifest {path}: line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error for {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            context: context.into(),
            source,
        }
    }
}
