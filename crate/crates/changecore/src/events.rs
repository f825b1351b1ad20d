//! Change-event records. An event log together with the pre-event mask fully
//! determines the post-event mask: create events store their transformed
//! absolute footprint, remove events the removed pixels, so replay is exact.

use serde::{Deserialize, Serialize};

/// Rotation applied to a pasted instance footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
    /// Free angle in degrees, nearest-neighbor resampled.
    Free(f64),
}

/// Where and how a created object was placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Top-left corner of the transformed footprint.
    pub row: u32,
    pub col: u32,
    pub rotation: Rotation,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeEventKind {
    Create,
    Remove,
}

/// One applied change event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ChangeEvent {
    /// An instance footprint pasted onto background.
    Create {
        label: u8,
        /// Absolute pixels of the transformed footprint.
        pixels: Vec<(u32, u32)>,
        placement: Placement,
        /// Area of the source instance before scaling/rotation.
        source_area: usize,
    },
    /// An existing instance assigned the background label.
    Remove { label: u8, pixels: Vec<(u32, u32)> },
}

impl ChangeEvent {
    pub fn kind(&self) -> ChangeEventKind {
        match self {
            ChangeEvent::Create { .. } => ChangeEventKind::Create,
            ChangeEvent::Remove { .. } => ChangeEventKind::Remove,
        }
    }

    pub fn label(&self) -> u8 {
        match self {
            ChangeEvent::Create { label, .. } | ChangeEvent::Remove { label, .. } => *label,
        }
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        match self {
            ChangeEvent::Create { pixels, .. } | ChangeEvent::Remove { pixels, .. } => pixels,
        }
    }

    pub fn area(&self) -> usize {
        self.pixels().len()
    }
}

/// A placement attempt that failed after the configured retries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPlacement {
    pub label: u8,
    pub retries: u32,
}

/// Per-sample event log as persisted next to generated samples.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<ChangeEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedPlacement>,
}

impl EventLog {
    pub fn new(events: Vec<ChangeEvent>, skipped: Vec<SkippedPlacement>) -> Self {
        Self { events, skipped }
    }
}
