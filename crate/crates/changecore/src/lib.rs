//! Shared domain types and plumbing for the changen workspace: semantic masks,
//! normalized images, noise maps, bitemporal samples, dataset ingestion with
//! line-delimited manifests, run configuration, tiling, and seeded RNG streams.
//!
//! Every other crate in the workspace builds on these types. The conventions
//! they pin down:
//!
//! - background label is 0 everywhere; "foreground" means label > 0,
//! - images live in `[-1, 1]` (tanh range) as `f64`,
//! - masks are 8-bit single-channel rasters on disk, images 8-bit RGB,
//! - manifests are JSON-lines with paths relative to the manifest file,
//! - all randomness derives from a single seed via tagged streams.

pub mod config;
pub mod dataset;
pub mod error;
pub mod events;
pub mod image_array;
pub mod instance;
pub mod manifest;
pub mod mask;
pub mod noise;
pub mod rng;
pub mod sample;
pub mod tile;

pub use config::{
    AugmentConfig, DetectorTrainConfig, EventConfig, GanTrainConfig, ModelConfig, RotationPolicy,
    RunConfig,
};
pub use dataset::{load_dataset, DatasetItem, SingleTemporalDataset};
pub use error::{CoreError, Result};
pub use events::{ChangeEvent, ChangeEventKind, EventLog, Placement, Rotation, SkippedPlacement};
pub use image_array::{denormalize, normalize, ImageArray};
pub use instance::{BBox, Instance};
pub use manifest::{BitemporalDataset, BitemporalRecord, SingleTemporalRecord};
pub use mask::SemanticMask;
pub use noise::NoiseMap;
pub use sample::BitemporalSample;
pub use tile::{tile, untile, Tile};
