//! Gaussian noise maps: `(d_z, H, W)` drawn from a standard normal, sampled at
//! the mask's full resolution and downsampled along the decoder input path.

use ndarray::Array3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};

/// A 3-D standard-normal noise map.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMap {
    values: Array3<f64>,
}

impl NoiseMap {
    /// Samples `(channels, height, width)` i.i.d. standard-normal values in
    /// row-major order, so a given RNG stream always yields the same map.
    pub fn sample(channels: usize, height: usize, width: usize, rng: &mut impl Rng) -> Self {
        let mut values = Array3::zeros((channels, height, width));
        for v in values.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        Self { values }
    }

    pub fn from_values(values: Array3<f64>) -> Result<Self> {
        let (c, h, w) = values.dim();
        if c == 0 {
            return Err(CoreError::ChannelCount { channels: 0 });
        }
        if h == 0 || w == 0 {
            return Err(CoreError::EmptySpatial {
                height: h,
                width: w,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn channels(&self) -> usize {
        self.values.dim().0
    }

    pub fn shape(&self) -> (usize, usize) {
        let (_, h, w) = self.values.dim();
        (h, w)
    }

    /// Nearest-neighbor resize to `(height, width)`, top-left convention.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        let (ch, h, w) = self.values.dim();
        let values = Array3::from_shape_fn((ch, height, width), |(k, r, c)| {
            let sr = (r * h / height).min(h - 1);
            let sc = (c * w / width).min(w - 1);
            self.values[(k, sr, sc)]
        });
        Self { values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, stream};

    #[test]
    fn deterministic_per_stream() {
        let a = NoiseMap::sample(2, 4, 4, &mut derive_rng(3, &[stream::NOISE, 0]));
        let b = NoiseMap::sample(2, 4, 4, &mut derive_rng(3, &[stream::NOISE, 0]));
        assert_eq!(a, b);
        let c = NoiseMap::sample(2, 4, 4, &mut derive_rng(3, &[stream::NOISE, 1]));
        assert_ne!(a, c);
    }

    #[test]
    fn resize_matches_stride_sampling() {
        let mut rng = derive_rng(1, &[stream::NOISE]);
        let z = NoiseMap::sample(1, 8, 8, &mut rng);
        let small = z.resize_nearest(2, 2);
        assert_eq!(small.values()[(0, 0, 0)], z.values()[(0, 0, 0)]);
        assert_eq!(small.values()[(0, 1, 1)], z.values()[(0, 4, 4)]);
    }
}
