//! Value-level operations on single samples. Each wraps the corresponding
//! graph forward with a frozen parameter session, so the training path and
//! these inference entry points share one implementation.

use changecore::{ImageArray, NoiseMap, SemanticMask};
use ndarray::{Array3, ArrayD, Ix4, IxDyn};
use tapegrad::{ops as tg, Session, Tape};

use crate::cond::{level_size, CondLevels};
use crate::net::SynthesisTrace;
use crate::params::GeneratorParams;
use crate::pyramid::{ChangeField, FeaturePyramid, LEVELS};
use crate::{GennetError, Result};

fn to_batch1(a: &Array3<f64>) -> ArrayD<f64> {
    let (c, h, w) = a.dim();
    let mut out = ArrayD::zeros(IxDyn(&[1, c, h, w]));
    for ((cc, r, col), &v) in a.indexed_iter() {
        out[[0, cc, r, col]] = v;
    }
    out
}

fn from_batch1(a: &ArrayD<f64>) -> Array3<f64> {
    let v4 = a.view().into_dimensionality::<Ix4>().expect("batch-1 4-d");
    let (n, c, h, w) = v4.dim();
    assert_eq!(n, 1);
    Array3::from_shape_fn((c, h, w), |(cc, r, col)| v4[(0, cc, r, col)])
}

fn check_divisible(h: usize, w: usize) -> Result<()> {
    if h % 32 != 0 || w % 32 != 0 {
        return Err(GennetError::Indivisible { h, w });
    }
    Ok(())
}

/// Multi-scale encoding of one pre-event image. Requires `H`, `W` divisible
/// by 32; every returned level obeys the size formula exactly.
pub fn encode_image(image: &ImageArray, params: &GeneratorParams) -> Result<FeaturePyramid> {
    let (h, w) = image.shape();
    check_divisible(h, w)?;
    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let x = tape.constant(to_batch1(&image.to_chw()));
    let levels = net.encode_graph(&sess, &x);
    let pyramid = FeaturePyramid::new(levels.iter().map(|v| from_batch1(v.value())).collect())?;
    pyramid.validate_formula(h, w, params.cfg.model.width_scale)?;
    Ok(pyramid)
}

/// Footnote-style masking: post-event features where the pre-event mask is
/// foreground, pre-event features elsewhere. Pure per-position selection,
/// bit-exact; the mask is nearest-downsampled to the feature resolution.
pub fn masking(
    f_t: &Array3<f64>,
    f_t1: &Array3<f64>,
    mask_t: &SemanticMask,
) -> Result<Array3<f64>> {
    if f_t.dim() != f_t1.dim() {
        let (a, b, c) = f_t.dim();
        let (d, e, f) = f_t1.dim();
        return Err(GennetError::ShapeMismatch {
            expected: vec![a, b, c],
            got: vec![d, e, f],
        });
    }
    let (_, h, w) = f_t.dim();
    let small = mask_t.resize_nearest(h, w)?;
    let mut fg = ArrayD::zeros(IxDyn(&[1, 1, h, w]));
    for ((r, c), &v) in small.labels().indexed_iter() {
        fg[[0, 0, r, c]] = f64::from(v != 0);
    }
    let tape = Tape::new();
    let off = tape.constant(to_batch1(f_t));
    let on = tape.constant(to_batch1(f_t1));
    let out = tg::select_mask(&off, &on, &fg);
    Ok(from_batch1(out.value()))
}

/// De-styling of one level array. Returns the final output (after the leaky
/// rectifier); see [`destyle_stages`] for the pre-activation normalized map.
pub fn destyle(f: &Array3<f64>, params: &GeneratorParams, level: usize) -> Result<Array3<f64>> {
    Ok(destyle_stages(f, params, level)?.1)
}

/// De-styling split into (normalized pre-activation, final output).
pub fn destyle_stages(
    f: &Array3<f64>,
    params: &GeneratorParams,
    level: usize,
) -> Result<(Array3<f64>, Array3<f64>)> {
    if level >= LEVELS {
        return Err(GennetError::LevelOutOfRange(level));
    }
    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let x = tape.constant(to_batch1(f));
    let (normalized, out) = net.destyle_graph(&sess, level, &x);
    Ok((from_batch1(normalized.value()), from_batch1(out.value())))
}

/// The masked transition layer at `level`: masking, de-styling, then
/// spatially-adaptive normalization conditioned on the post-event mask,
/// yielding the change field.
pub fn masked_transition(
    f_t: &Array3<f64>,
    f_t1: &Array3<f64>,
    mask_t: &SemanticMask,
    mask_t1: &SemanticMask,
    params: &GeneratorParams,
    level: usize,
) -> Result<ChangeField> {
    if level >= LEVELS {
        return Err(GennetError::LevelOutOfRange(level));
    }
    if f_t.dim() != f_t1.dim() {
        let (a, b, c) = f_t.dim();
        let (d, e, f) = f_t1.dim();
        return Err(GennetError::ShapeMismatch {
            expected: vec![a, b, c],
            got: vec![d, e, f],
        });
    }
    let (_, h, w) = f_t.dim();
    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);

    let small_t = mask_t.resize_nearest(h, w)?;
    let mut fg = ArrayD::zeros(IxDyn(&[1, 1, h, w]));
    for ((r, c), &v) in small_t.labels().indexed_iter() {
        fg[[0, 0, r, c]] = f64::from(v != 0);
    }
    let onehot = to_batch1(&mask_t1.resize_nearest(h, w)?.one_hot());

    let ft = tape.constant(to_batch1(f_t));
    let fdec = tape.constant(to_batch1(f_t1));
    let delta = net.masked_transition_graph(&sess, level, &ft, &fdec, &fg, &onehot);
    Ok(ChangeField {
        delta: from_batch1(delta.value()),
    })
}

/// One decoder step: `G_level(f + delta, S_{t+1}, z)`, then 2x nearest
/// upsampling (except at the last level). Output channels and spatial size
/// follow the pyramid schedule.
pub fn decode_step(
    f_t1_i: &Array3<f64>,
    delta: &ChangeField,
    mask_t1: &SemanticMask,
    z: &NoiseMap,
    params: &GeneratorParams,
    level: usize,
) -> Result<Array3<f64>> {
    if level >= LEVELS {
        return Err(GennetError::LevelOutOfRange(level));
    }
    if f_t1_i.dim() != delta.delta.dim() {
        let (a, b, c) = f_t1_i.dim();
        let (d, e, f) = delta.delta.dim();
        return Err(GennetError::ShapeMismatch {
            expected: vec![a, b, c],
            got: vec![d, e, f],
        });
    }
    let (_, h, w) = f_t1_i.dim();
    let c = params.cfg.class_count();
    let d_z = params.cfg.d_z();
    let oh = mask_t1.resize_nearest(h, w)?.one_hot();
    let zv = z.resize_nearest(h, w);
    if zv.values().dim().0 != d_z {
        return Err(GennetError::ShapeMismatch {
            expected: vec![d_z],
            got: vec![zv.values().dim().0],
        });
    }
    let mut cond = Array3::zeros((c + d_z, h, w));
    for ((cc, r, col), &v) in oh.indexed_iter() {
        cond[(cc, r, col)] = v;
    }
    for ((cc, r, col), &v) in zv.values().indexed_iter() {
        cond[(c + cc, r, col)] = v;
    }

    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let x = tg::add(
        &tape.constant(to_batch1(f_t1_i)),
        &tape.constant(to_batch1(&delta.delta)),
    );
    let mut out = net.resblock_graph(&sess, level, &x, &to_batch1(&cond));
    if level + 1 < LEVELS {
        out = tg::upsample_nearest_x2(&out);
    }
    Ok(from_batch1(out.value()))
}

fn validate_synthesis_inputs(
    mask_t1: &SemanticMask,
    image_t: &ImageArray,
    mask_t: &SemanticMask,
    z: &NoiseMap,
    params: &GeneratorParams,
) -> Result<()> {
    let (h, w) = image_t.shape();
    check_divisible(h, w)?;
    for shape in [mask_t.shape(), mask_t1.shape(), z.shape()] {
        if shape != (h, w) {
            return Err(GennetError::ShapeMismatch {
                expected: vec![h, w],
                got: vec![shape.0, shape.1],
            });
        }
    }
    if z.channels() != params.cfg.d_z() {
        return Err(GennetError::ShapeMismatch {
            expected: vec![params.cfg.d_z()],
            got: vec![z.channels()],
        });
    }
    Ok(())
}

/// Synthesizes the post-event image. Deterministic given (inputs, z, params);
/// output is in `[-1, 1]` by the tanh head.
pub fn synthesize(
    mask_t1: &SemanticMask,
    image_t: &ImageArray,
    mask_t: &SemanticMask,
    z: &NoiseMap,
    params: &GeneratorParams,
) -> Result<ImageArray> {
    Ok(synthesize_with_trace(mask_t1, image_t, mask_t, z, params)?.0)
}

/// [`synthesize`] plus the per-level shape trace.
pub fn synthesize_with_trace(
    mask_t1: &SemanticMask,
    image_t: &ImageArray,
    mask_t: &SemanticMask,
    z: &NoiseMap,
    params: &GeneratorParams,
) -> Result<(ImageArray, SynthesisTrace)> {
    validate_synthesis_inputs(mask_t1, image_t, mask_t, z, params)?;
    let net = params.net();
    let cond = CondLevels::build(
        &params.cfg,
        std::slice::from_ref(mask_t),
        std::slice::from_ref(mask_t1),
        std::slice::from_ref(z),
    )?;
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let x = tape.constant(to_batch1(&image_t.to_chw()));
    let mut trace = SynthesisTrace::default();
    let out = net.synthesize_graph(&sess, &x, &cond, Some(&mut trace));
    let image = ImageArray::from_chw(from_batch1(out.value()).view())?;
    Ok((image, trace))
}

/// Conditioning spatial size at a level, exposed for tests.
pub fn level_spatial(h: usize, w: usize, level: usize) -> (usize, usize) {
    level_size(h, w, level)
}
