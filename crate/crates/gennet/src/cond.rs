//! Per-level conditioning tensors, precomputed outside the graph: the one-hot
//! post-event mask concatenated with the noise map (decoder conditioning),
//! the one-hot post-event mask alone (masked-transition conditioning), and
//! the pre-event foreground indicator (masking selector). Masks and noise are
//! resized to each level with nearest-neighbor sampling.

use changecore::{NoiseMap, SemanticMask};
use ndarray::{Array3, ArrayD, IxDyn};

use crate::config::GeneratorConfig;
use crate::pyramid::LEVELS;
use crate::{GennetError, Result};

/// Batched per-level conditioning constants.
pub struct CondLevels {
    /// `(N, C + d_z, h_i, w_i)` per level: decoder conditioning.
    pub cond: Vec<ArrayD<f64>>,
    /// `(N, C, h_i, w_i)` per level: one-hot post-event mask.
    pub onehot_t1: Vec<ArrayD<f64>>,
    /// `(N, 1, h_i, w_i)` per level: pre-event foreground indicator.
    pub fg_t: Vec<ArrayD<f64>>,
}

fn stack_batch(parts: &[Array3<f64>]) -> ArrayD<f64> {
    let (c, h, w) = parts[0].dim();
    let mut out = ArrayD::zeros(IxDyn(&[parts.len(), c, h, w]));
    for (n, p) in parts.iter().enumerate() {
        for ((cc, r, col), &v) in p.indexed_iter() {
            out[[n, cc, r, col]] = v;
        }
    }
    out
}

/// Spatial size of pyramid level `i` for an input of `(h, w)`.
pub(crate) fn level_size(h: usize, w: usize, level: usize) -> (usize, usize) {
    let div = 1usize << (5 - level);
    (h / div, w / div)
}

impl CondLevels {
    /// Builds all levels for a batch. All masks must share the configured
    /// class count and the noise maps the full input resolution.
    pub fn build(
        cfg: &GeneratorConfig,
        mask_t: &[SemanticMask],
        mask_t1: &[SemanticMask],
        noise: &[NoiseMap],
    ) -> Result<Self> {
        let n = mask_t.len();
        assert_eq!(mask_t1.len(), n);
        assert_eq!(noise.len(), n);
        let (h, w) = mask_t[0].shape();
        if h % 32 != 0 || w % 32 != 0 {
            return Err(GennetError::Indivisible { h, w });
        }
        for m in mask_t.iter().chain(mask_t1.iter()) {
            if m.class_count() != cfg.model.class_count {
                return Err(GennetError::ClassCount {
                    mask: m.class_count(),
                    config: cfg.model.class_count,
                });
            }
            if m.shape() != (h, w) {
                return Err(GennetError::ShapeMismatch {
                    expected: vec![h, w],
                    got: vec![m.shape().0, m.shape().1],
                });
            }
        }
        let d_z = cfg.d_z();
        let c = cfg.class_count();

        let mut cond = Vec::with_capacity(LEVELS);
        let mut onehot_t1 = Vec::with_capacity(LEVELS);
        let mut fg_t = Vec::with_capacity(LEVELS);
        for level in 0..LEVELS {
            let (lh, lw) = level_size(h, w, level);
            let mut cond_parts = Vec::with_capacity(n);
            let mut onehot_parts = Vec::with_capacity(n);
            let mut fg_parts = Vec::with_capacity(n);
            for i in 0..n {
                let m1 = mask_t1[i].resize_nearest(lh, lw)?;
                let oh = m1.one_hot();
                let z = noise[i].resize_nearest(lh, lw);
                let zv = z.values();
                debug_assert_eq!(zv.dim().0, d_z);
                let mut joint = Array3::zeros((c + d_z, lh, lw));
                for ((cc, r, col), &v) in oh.indexed_iter() {
                    joint[(cc, r, col)] = v;
                }
                for ((cc, r, col), &v) in zv.indexed_iter() {
                    joint[(c + cc, r, col)] = v;
                }
                cond_parts.push(joint);
                onehot_parts.push(oh);
                let m0 = mask_t[i].resize_nearest(lh, lw)?;
                let mut fg = Array3::zeros((1, lh, lw));
                for ((r, col), &v) in m0.labels().indexed_iter() {
                    fg[(0, r, col)] = f64::from(v != 0);
                }
                fg_parts.push(fg);
            }
            cond.push(stack_batch(&cond_parts));
            onehot_t1.push(stack_batch(&onehot_parts));
            fg_t.push(stack_batch(&fg_parts));
        }
        Ok(Self {
            cond,
            onehot_t1,
            fg_t,
        })
    }
}
