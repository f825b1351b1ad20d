//! Pluggable feature extraction. The metrics consume precomputed features
//! and probabilities; which network produces them is a deployment choice.
//! The built-in extractor is a deterministic, training-free image statistic
//! good enough for desk-scale comparisons.

use changecore::rng::{derive_rng, stream};
use changecore::ImageArray;
use ndarray::{Array1, Array2};
use rand::Rng;

/// Anything that maps an image to a feature vector and class probabilities.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;
    fn classes(&self) -> usize;
    fn features(&self, image: &ImageArray) -> Array1<f64>;
    /// Rows must sum to 1.
    fn class_probs(&self, image: &ImageArray) -> Array1<f64>;
}

/// Deterministic statistics extractor: per-channel means/stds, a 4x4 grid of
/// block means per channel, and per-channel gradient energy; probabilities
/// come from a seeded random linear head over the features.
pub struct MomentsExtractor {
    classes: usize,
    head: Array2<f64>,
}

const GRID: usize = 4;

impl MomentsExtractor {
    pub fn new(classes: usize, seed: u64) -> Self {
        let dim = Self::feature_dim();
        let mut rng = derive_rng(seed, &[stream::EXTRACTOR]);
        let head = Array2::from_shape_fn((classes, dim), |_| rng.random_range(-1.0..1.0));
        Self { classes, head }
    }

    pub fn feature_dim() -> usize {
        3 + 3 + GRID * GRID * 3 + 3
    }
}

impl FeatureExtractor for MomentsExtractor {
    fn dim(&self) -> usize {
        Self::feature_dim()
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn features(&self, image: &ImageArray) -> Array1<f64> {
        let (h, w) = image.shape();
        let px = image.pixels();
        let n = (h * w) as f64;
        let mut out = Vec::with_capacity(self.dim());
        // channel means and stds
        let mut means = [0.0; 3];
        for ch in 0..3 {
            let mut sum = 0.0;
            for r in 0..h {
                for c in 0..w {
                    sum += px[(r, c, ch)];
                }
            }
            means[ch] = sum / n;
            out.push(means[ch]);
        }
        for ch in 0..3 {
            let mut sq = 0.0;
            for r in 0..h {
                for c in 0..w {
                    let d = px[(r, c, ch)] - means[ch];
                    sq += d * d;
                }
            }
            out.push((sq / n).sqrt());
        }
        // block means on a GRID x GRID partition
        for gr in 0..GRID {
            for gc in 0..GRID {
                let r0 = gr * h / GRID;
                let r1 = ((gr + 1) * h / GRID).max(r0 + 1).min(h);
                let c0 = gc * w / GRID;
                let c1 = ((gc + 1) * w / GRID).max(c0 + 1).min(w);
                for ch in 0..3 {
                    let mut sum = 0.0;
                    for r in r0..r1 {
                        for c in c0..c1 {
                            sum += px[(r, c, ch)];
                        }
                    }
                    out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
                }
            }
        }
        // gradient energy per channel
        for ch in 0..3 {
            let mut e = 0.0;
            for r in 0..h.saturating_sub(1) {
                for c in 0..w.saturating_sub(1) {
                    let dx = px[(r, c + 1, ch)] - px[(r, c, ch)];
                    let dy = px[(r + 1, c, ch)] - px[(r, c, ch)];
                    e += dx * dx + dy * dy;
                }
            }
            out.push((e / n).sqrt());
        }
        Array1::from_vec(out)
    }

    fn class_probs(&self, image: &ImageArray) -> Array1<f64> {
        let f = self.features(image);
        let logits: Vec<f64> = (0..self.classes)
            .map(|k| self.head.row(k).dot(&f))
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Array1::from_vec(exps.into_iter().map(|e| e / total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn probs_sum_to_one_and_features_are_deterministic() {
        let ex = MomentsExtractor::new(5, 3);
        let img = ImageArray::new(Array3::from_shape_fn((16, 16, 3), |(r, c, ch)| {
            ((r * 13 + c * 5 + ch) % 255) as f64 / 127.5 - 1.0
        }))
        .unwrap();
        let p = ex.class_probs(&img);
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert_eq!(ex.features(&img), ex.features(&img));
        assert_eq!(ex.dim(), ex.features(&img).len());
    }
}
