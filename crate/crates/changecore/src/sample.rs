//! One generated bitemporal training sample: aligned pre/post images and
//! masks, the {0 unchanged, 1 create, 2 remove} change label, and the event
//! log that produced the transition.

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::events::ChangeEvent;
use crate::image_array::ImageArray;
use crate::mask::SemanticMask;

pub const CHANGE_NONE: u8 = 0;
pub const CHANGE_CREATE: u8 = 1;
pub const CHANGE_REMOVE: u8 = 2;

#[derive(Debug, Clone)]
pub struct BitemporalSample {
    pub image_t: ImageArray,
    pub mask_t: SemanticMask,
    pub mask_t1: SemanticMask,
    pub image_t1: ImageArray,
    /// Per-pixel change label: 0 unchanged, 1 create, 2 remove.
    pub change: Array2<u8>,
    pub events: Vec<ChangeEvent>,
}

impl BitemporalSample {
    /// Binary view of the change label (1 wherever the label is non-zero).
    pub fn binary_change(&self) -> Array2<u8> {
        self.change.mapv(|v| u8::from(v != CHANGE_NONE))
    }

    /// Checks the structural invariants: all spatial sizes identical and
    /// `change == 0` exactly where the two masks agree.
    pub fn validate(&self) -> Result<()> {
        let shape = self.image_t.shape();
        for other in [
            self.mask_t.shape(),
            self.mask_t1.shape(),
            self.image_t1.shape(),
            self.change.dim(),
        ] {
            if other != shape {
                return Err(CoreError::ShapeMismatch { a: shape, b: other });
            }
        }
        for ((r, c), &ch) in self.change.indexed_iter() {
            let same = self.mask_t.labels()[(r, c)] == self.mask_t1.labels()[(r, c)];
            if same != (ch == CHANGE_NONE) {
                return Err(CoreError::Config(format!(
                    "change label {ch} at ({r}, {c}) disagrees with mask transition"
                )));
            }
        }
        Ok(())
    }
}
