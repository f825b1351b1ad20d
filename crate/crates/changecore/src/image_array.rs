//! Normalized images. All images in the pipeline are `(H, W, 3)` arrays of
//! `f64` in `[-1, 1]`, matching the generator's tanh output range; 8-bit RGB
//! rasters are the on-disk form.

use std::path::Path;

use image::RgbImage;
use ndarray::{Array3, ArrayView3};

use crate::error::{CoreError, Result};

/// An RGB image normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageArray {
    pixels: Array3<f64>,
}

impl ImageArray {
    /// Validates shape `(H, W, 3)`, finiteness, and the `[-1, 1]` range.
    pub fn new(pixels: Array3<f64>) -> Result<Self> {
        let (h, w, c) = pixels.dim();
        if c != 3 {
            return Err(CoreError::ChannelCount { channels: c });
        }
        if h == 0 || w == 0 {
            return Err(CoreError::EmptySpatial {
                height: h,
                width: w,
            });
        }
        for ((r, col, ch), &v) in pixels.indexed_iter() {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(CoreError::ImageOutOfRange {
                    value: v,
                    index: [r, col, ch],
                });
            }
        }
        Ok(Self { pixels })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            pixels: Array3::zeros((height, width, 3)),
        }
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array3<f64> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn shape(&self) -> (usize, usize) {
        let (h, w, _) = self.pixels.dim();
        (h, w)
    }

    /// Channel-first view `(3, H, W)` for network consumption.
    pub fn to_chw(&self) -> Array3<f64> {
        let (h, w, _) = self.pixels.dim();
        Array3::from_shape_fn((3, h, w), |(c, r, col)| self.pixels[(r, col, c)])
    }

    /// Builds an image from a channel-first array, validating the range.
    pub fn from_chw(chw: ArrayView3<f64>) -> Result<Self> {
        let (c, h, w) = chw.dim();
        if c != 3 {
            return Err(CoreError::ChannelCount { channels: c });
        }
        let hwc = Array3::from_shape_fn((h, w, 3), |(r, col, ch)| chw[(ch, r, col)]);
        Self::new(hwc)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = self.to_rgb8();
        img.save(path).map_err(|source| CoreError::Codec {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| CoreError::Codec {
                path: path.to_path_buf(),
                source,
            })?
            .into_rgb8();
        Ok(Self::from_rgb8(&img))
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let pixels = Array3::from_shape_fn((h as usize, w as usize, 3), |(r, c, ch)| {
            f64::from(img.get_pixel(c as u32, r as u32).0[ch]) / 127.5 - 1.0
        });
        Self { pixels }
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let (h, w, _) = self.pixels.dim();
        let mut img = RgbImage::new(w as u32, h as u32);
        for r in 0..h {
            for c in 0..w {
                let px = [
                    quantize(self.pixels[(r, c, 0)]),
                    quantize(self.pixels[(r, c, 1)]),
                    quantize(self.pixels[(r, c, 2)]),
                ];
                img.put_pixel(c as u32, r as u32, image::Rgb(px));
            }
        }
        img
    }
}

fn quantize(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Maps raw 8-bit RGB values `(H, W, 3)` into `[-1, 1]`.
///
/// 0 maps to exactly -1 and 255 to exactly +1.
pub fn normalize(raw: &Array3<u8>) -> Result<ImageArray> {
    let (_, _, c) = raw.dim();
    if c != 3 {
        return Err(CoreError::ChannelCount { channels: c });
    }
    ImageArray::new(raw.mapv(|v| f64::from(v) / 127.5 - 1.0))
}

/// Inverse of [`normalize`], rounding back to 8-bit values.
pub fn denormalize(image: &ImageArray) -> Array3<u8> {
    image.pixels().mapv(quantize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_map_exactly() {
        let zeros = Array3::<u8>::zeros((2, 2, 3));
        let img = normalize(&zeros).unwrap();
        assert!(img.pixels().iter().all(|&v| v == -1.0));
        let max = Array3::<u8>::from_elem((2, 2, 3), 255);
        let img = normalize(&max).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn round_trip_is_exact_per_channel() {
        let raw = Array3::from_shape_fn((4, 4, 3), |(r, c, ch)| ((r * 16 + c * 3 + ch) % 256) as u8);
        let back = denormalize(&normalize(&raw).unwrap());
        assert_eq!(raw, back);
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let raw = Array3::<u8>::zeros((2, 2, 4));
        assert!(matches!(
            normalize(&raw),
            Err(CoreError::ChannelCount { channels: 4 })
        ));
    }

    #[test]
    fn chw_round_trip() {
        let raw = Array3::from_shape_fn((3, 5, 3), |(r, c, ch)| ((r + 2 * c + ch) % 256) as u8);
        let img = normalize(&raw).unwrap();
        let chw = img.to_chw();
        let back = ImageArray::from_chw(chw.view()).unwrap();
        assert_eq!(img, back);
    }
}
