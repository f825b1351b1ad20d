//! Connected foreground objects extracted from semantic masks. An instance is
//! one maximal connected component of a single class label.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Tight bounding box, half-open: rows in `r0..r1`, cols in `c0..c1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub r0: u32,
    pub c0: u32,
    pub r1: u32,
    pub c1: u32,
}

impl BBox {
    pub fn height(&self) -> usize {
        (self.r1 - self.r0) as usize
    }

    pub fn width(&self) -> usize {
        (self.c1 - self.c0) as usize
    }
}

/// One connected component of a foreground class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub label: u8,
    /// Absolute `(row, col)` coordinates, sorted row-major.
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BBox,
    pub area: usize,
}

impl Instance {
    /// Builds an instance from its pixel set, computing the tight bbox.
    ///
    /// Panics if `pixels` is empty: an instance has area >= 1 by definition.
    pub fn new(label: u8, mut pixels: Vec<(u32, u32)>) -> Self {
        assert!(!pixels.is_empty(), "instance must contain at least one pixel");
        pixels.sort_unstable();
        let mut r0 = u32::MAX;
        let mut c0 = u32::MAX;
        let mut r1 = 0;
        let mut c1 = 0;
        for &(r, c) in &pixels {
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r + 1);
            c1 = c1.max(c + 1);
        }
        let area = pixels.len();
        Self {
            label,
            pixels,
            bbox: BBox { r0, c0, r1, c1 },
            area,
        }
    }

    /// Boolean footprint relative to the bounding box.
    pub fn footprint(&self) -> Array2<bool> {
        let mut fp = Array2::from_elem((self.bbox.height(), self.bbox.width()), false);
        for &(r, c) in &self.pixels {
            fp[((r - self.bbox.r0) as usize, (c - self.bbox.c0) as usize)] = true;
        }
        fp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_is_tight() {
        let inst = Instance::new(1, vec![(2, 3), (2, 4), (3, 3)]);
        assert_eq!(
            inst.bbox,
            BBox {
                r0: 2,
                c0: 3,
                r1: 4,
                c1: 5
            }
        );
        assert_eq!(inst.area, 3);
        let fp = inst.footprint();
        assert!(fp[(0, 0)] && fp[(0, 1)] && fp[(1, 0)]);
        assert!(!fp[(1, 1)]);
    }
}
