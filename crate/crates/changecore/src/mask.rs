//! Semantic label maps. Labels are integral (`u8`), background is 0, and every
//! label must stay strictly below the class count so one-hot encodings are
//! well defined.

use std::path::Path;

use image::GrayImage;
use ndarray::{Array2, Array3};

use crate::error::{CoreError, Result};

/// A per-pixel semantic label map with a fixed class count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMask {
    labels: Array2<u8>,
    class_count: u16,
}

impl SemanticMask {
    /// Validates that labels fit below `class_count` and the map is non-empty.
    pub fn new(labels: Array2<u8>, class_count: u16) -> Result<Self> {
        if class_count < 2 {
            return Err(CoreError::ClassCount(class_count));
        }
        let (h, w) = labels.dim();
        if h == 0 || w == 0 {
            return Err(CoreError::EmptySpatial {
                height: h,
                width: w,
            });
        }
        for ((r, c), &v) in labels.indexed_iter() {
            if u16::from(v) >= class_count {
                return Err(CoreError::LabelOutOfRange {
                    label: v,
                    class_count,
                    row: r,
                    col: c,
                });
            }
        }
        Ok(Self {
            labels,
            class_count,
        })
    }

    /// All-background mask.
    pub fn zeros(height: usize, width: usize, class_count: u16) -> Result<Self> {
        Self::new(Array2::zeros((height, width)), class_count)
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn into_labels(self) -> Array2<u8> {
        self.labels
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    pub fn height(&self) -> usize {
        self.labels.dim().0
    }

    pub fn width(&self) -> usize {
        self.labels.dim().1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.labels.dim()
    }

    /// Foreground means any non-background label.
    pub fn is_foreground(&self, row: usize, col: usize) -> bool {
        self.labels[(row, col)] != 0
    }

    pub fn foreground_area(&self) -> usize {
        self.labels.iter().filter(|&&v| v != 0).count()
    }

    /// One-hot encoding with shape `(class_count, H, W)`.
    pub fn one_hot(&self) -> Array3<f64> {
        let (h, w) = self.shape();
        let c = self.class_count as usize;
        let mut out = Array3::zeros((c, h, w));
        for ((r, col), &v) in self.labels.indexed_iter() {
            out[(v as usize, r, col)] = 1.0;
        }
        out
    }

    /// Foreground indicator as `f64` (1.0 where label > 0).
    pub fn foreground_map(&self) -> Array2<f64> {
        self.labels.mapv(|v| if v != 0 { 1.0 } else { 0.0 })
    }

    /// Nearest-neighbor downsample to `(height, width)` using the top-left
    /// convention `src = floor(dst * src_len / dst_len)`, which preserves
    /// label identity.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::EmptySpatial { height, width });
        }
        let (h, w) = self.shape();
        let labels = Array2::from_shape_fn((height, width), |(r, c)| {
            let sr = (r * h / height).min(h - 1);
            let sc = (c * w / width).min(w - 1);
            self.labels[(sr, sc)]
        });
        Ok(Self {
            labels,
            class_count: self.class_count,
        })
    }

    /// Writes the labels as an 8-bit single-channel PNG (bit-exact storage).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (h, w) = self.shape();
        let mut img = GrayImage::new(w as u32, h as u32);
        for ((r, c), &v) in self.labels.indexed_iter() {
            img.put_pixel(c as u32, r as u32, image::Luma([v]));
        }
        img.save(path).map_err(|source| CoreError::Codec {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads an 8-bit single-channel PNG written by [`SemanticMask::save_png`].
    pub fn load_png(path: &Path, class_count: u16) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| CoreError::Codec {
                path: path.to_path_buf(),
                source,
            })?
            .into_luma8();
        let (w, h) = img.dimensions();
        let labels = Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
            img.get_pixel(c as u32, r as u32).0[0]
        });
        Self::new(labels, class_count)
    }

    /// Maximum label present (0 for an all-background mask).
    pub fn max_label(&self) -> u8 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}
