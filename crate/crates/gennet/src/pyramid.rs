//! The six-level multi-scale feature pyramid and its size contract.

use ndarray::Array3;

use crate::{GennetError, Result};

/// Number of pyramid levels.
pub const LEVELS: usize = 6;

/// Expected `(channels, height, width)` of every level for an input of size
/// `(h, w)` at a given width scale: channels `round(512*ws / 2^i)`, spatial
/// `(h / 2^(5-i), w / 2^(5-i))`.
pub fn expected_level_shapes(h: usize, w: usize, width_scale: f64) -> Vec<(usize, usize, usize)> {
    (0..LEVELS)
        .map(|i| {
            let c = ((512.0 * width_scale / (1u64 << i) as f64).round() as usize).max(1);
            let div = 1usize << (5 - i);
            (c, h / div, w / div)
        })
        .collect()
}

/// Multi-scale features of one image, finest level last.
#[derive(Debug, Clone)]
pub struct FeaturePyramid {
    pub levels: Vec<Array3<f64>>,
}

impl FeaturePyramid {
    pub fn new(levels: Vec<Array3<f64>>) -> Result<Self> {
        if levels.len() != LEVELS {
            return Err(GennetError::ShapeMismatch {
                expected: vec![LEVELS],
                got: vec![levels.len()],
            });
        }
        for level in &levels {
            if level.iter().any(|v| !v.is_finite()) {
                return Err(GennetError::Checkpoint(
                    "non-finite value in feature pyramid".into(),
                ));
            }
        }
        Ok(Self { levels })
    }

    /// Checks every level against the size formula.
    pub fn validate_formula(&self, h: usize, w: usize, width_scale: f64) -> Result<()> {
        let expected = expected_level_shapes(h, w, width_scale);
        for (level, &(c, lh, lw)) in self.levels.iter().zip(expected.iter()) {
            if level.dim() != (c, lh, lw) {
                let (a, b, d) = level.dim();
                return Err(GennetError::ShapeMismatch {
                    expected: vec![c, lh, lw],
                    got: vec![a, b, d],
                });
            }
        }
        Ok(())
    }
}

/// Per-level feature delta added to the decoder features.
#[derive(Debug, Clone)]
pub struct ChangeField {
    pub delta: Array3<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_at_256_full_scale() {
        let shapes = expected_level_shapes(256, 256, 1.0);
        assert_eq!(shapes[0], (512, 8, 8));
        assert_eq!(shapes[5], (16, 256, 256));
    }

    #[test]
    fn formula_at_64_full_scale() {
        let shapes = expected_level_shapes(64, 64, 1.0);
        assert_eq!(shapes[0], (512, 2, 2));
    }

    #[test]
    fn formula_desk_scale_channels() {
        let shapes = expected_level_shapes(256, 256, 0.125);
        assert_eq!(shapes[0].0, 64);
        assert_eq!(shapes[5].0, 2);
    }

    #[test]
    fn rectangular_inputs() {
        let shapes = expected_level_shapes(256, 512, 1.0);
        assert_eq!(shapes[0], (512, 8, 16));
        assert_eq!(shapes[5], (16, 256, 512));
    }
}
