//! Geometric and photometric training augmentations. The same geometric
//! transform always applies to the image and mask; masks are resampled with
//! nearest-neighbor only, so no labels are invented.

use changecore::{AugmentConfig, ImageArray, SemanticMask};
use ndarray::{Array2, Array3};
use rand::Rng;

use crate::{AdvTrainError, Result};

pub fn hflip(image: &ImageArray, mask: &SemanticMask) -> (ImageArray, SemanticMask) {
    let (h, w) = image.shape();
    let img = Array3::from_shape_fn((h, w, 3), |(r, c, ch)| image.pixels()[(r, w - 1 - c, ch)]);
    let lab = Array2::from_shape_fn((h, w), |(r, c)| mask.labels()[(r, w - 1 - c)]);
    (
        ImageArray::new(img).unwrap(),
        SemanticMask::new(lab, mask.class_count()).unwrap(),
    )
}

pub fn vflip(image: &ImageArray, mask: &SemanticMask) -> (ImageArray, SemanticMask) {
    let (h, w) = image.shape();
    let img = Array3::from_shape_fn((h, w, 3), |(r, c, ch)| image.pixels()[(h - 1 - r, c, ch)]);
    let lab = Array2::from_shape_fn((h, w), |(r, c)| mask.labels()[(h - 1 - r, c)]);
    (
        ImageArray::new(img).unwrap(),
        SemanticMask::new(lab, mask.class_count()).unwrap(),
    )
}

/// Counter-clockwise rotation by `k` quarter turns.
pub fn rot90(image: &ImageArray, mask: &SemanticMask, k: usize) -> (ImageArray, SemanticMask) {
    let mut img = image.clone();
    let mut msk = mask.clone();
    for _ in 0..(k % 4) {
        let (h, w) = img.shape();
        let src = img.pixels().clone();
        let lab_src = msk.labels().clone();
        let rot_img = Array3::from_shape_fn((w, h, 3), |(r, c, ch)| src[(c, w - 1 - r, ch)]);
        let rot_lab = Array2::from_shape_fn((w, h), |(r, c)| lab_src[(c, w - 1 - r)]);
        img = ImageArray::new(rot_img).unwrap();
        msk = SemanticMask::new(rot_lab, mask.class_count()).unwrap();
    }
    (img, msk)
}

pub fn transpose(image: &ImageArray, mask: &SemanticMask) -> (ImageArray, SemanticMask) {
    let (h, w) = image.shape();
    let img = Array3::from_shape_fn((w, h, 3), |(r, c, ch)| image.pixels()[(c, r, ch)]);
    let lab = Array2::from_shape_fn((w, h), |(r, c)| mask.labels()[(c, r)]);
    (
        ImageArray::new(img).unwrap(),
        SemanticMask::new(lab, mask.class_count()).unwrap(),
    )
}

/// Scale jitter: bilinear for the image, nearest for the mask.
pub fn resize_pair(
    image: &ImageArray,
    mask: &SemanticMask,
    factor: f64,
) -> (ImageArray, SemanticMask) {
    let (h, w) = image.shape();
    let nh = ((h as f64 * factor).round() as usize).max(1);
    let nw = ((w as f64 * factor).round() as usize).max(1);
    let src = image.pixels();
    let img = Array3::from_shape_fn((nh, nw, 3), |(r, c, ch)| {
        // align-corners=false bilinear sampling
        let sy = ((r as f64 + 0.5) * h as f64 / nh as f64 - 0.5).clamp(0.0, h as f64 - 1.0);
        let sx = ((c as f64 + 0.5) * w as f64 / nw as f64 - 0.5).clamp(0.0, w as f64 - 1.0);
        let y0 = sy.floor() as usize;
        let x0 = sx.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let fy = sy - y0 as f64;
        let fx = sx - x0 as f64;
        let v = src[(y0, x0, ch)] * (1.0 - fy) * (1.0 - fx)
            + src[(y0, x1, ch)] * (1.0 - fy) * fx
            + src[(y1, x0, ch)] * fy * (1.0 - fx)
            + src[(y1, x1, ch)] * fy * fx;
        v.clamp(-1.0, 1.0)
    });
    let msk = mask.resize_nearest(nh, nw).unwrap();
    (ImageArray::new(img).unwrap(), msk)
}

/// Per-image brightness/contrast jitter on the image only.
pub fn color_jitter(image: &ImageArray, strength: f64, rng: &mut impl Rng) -> ImageArray {
    let contrast = 1.0 + rng.random_range(-strength..=strength);
    let brightness = rng.random_range(-strength..=strength);
    ImageArray::new(
        image
            .pixels()
            .mapv(|v| (v * contrast + brightness).clamp(-1.0, 1.0)),
    )
    .unwrap()
}

/// Random aligned crop.
pub fn random_crop(
    image: &ImageArray,
    mask: &SemanticMask,
    size: usize,
    rng: &mut impl Rng,
) -> Result<(ImageArray, SemanticMask)> {
    let (h, w) = image.shape();
    if size > h || size > w {
        return Err(AdvTrainError::CropTooLarge { crop: size, h, w });
    }
    let r0 = if h == size { 0 } else { rng.random_range(0..=h - size) };
    let c0 = if w == size { 0 } else { rng.random_range(0..=w - size) };
    let img = Array3::from_shape_fn((size, size, 3), |(r, c, ch)| {
        image.pixels()[(r0 + r, c0 + c, ch)]
    });
    let lab = Array2::from_shape_fn((size, size), |(r, c)| mask.labels()[(r0 + r, c0 + c)]);
    Ok((
        ImageArray::new(img)?,
        SemanticMask::new(lab, mask.class_count())?,
    ))
}

/// Applies the configured augmentations in a fixed order: scale jitter,
/// flips, right-angle rotation, transpose, crop, color jitter. With
/// everything disabled this is the identity.
pub fn augment(
    image: &ImageArray,
    mask: &SemanticMask,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<(ImageArray, SemanticMask)> {
    let mut img = image.clone();
    let mut msk = mask.clone();
    if let Some((lo, hi)) = cfg.scale_jitter {
        let mut factor = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        if let Some(crop) = cfg.crop {
            // never jitter below the crop size
            let (h, w) = img.shape();
            let min_factor = crop as f64 / h.min(w) as f64;
            factor = factor.max(min_factor);
        }
        if factor != 1.0 {
            let (i2, m2) = resize_pair(&img, &msk, factor);
            img = i2;
            msk = m2;
        }
    }
    if cfg.flip {
        if rng.random_bool(0.5) {
            let (i2, m2) = hflip(&img, &msk);
            img = i2;
            msk = m2;
        }
        if rng.random_bool(0.5) {
            let (i2, m2) = vflip(&img, &msk);
            img = i2;
            msk = m2;
        }
    }
    if cfg.rotate {
        let k = rng.random_range(0..4usize);
        if k > 0 {
            let (i2, m2) = rot90(&img, &msk, k);
            img = i2;
            msk = m2;
        }
    }
    if cfg.transpose && rng.random_bool(0.5) {
        let (i2, m2) = transpose(&img, &msk);
        img = i2;
        msk = m2;
    }
    if let Some(size) = cfg.crop {
        let (i2, m2) = random_crop(&img, &msk, size, rng)?;
        img = i2;
        msk = m2;
    }
    if let Some(strength) = cfg.color_jitter {
        img = color_jitter(&img, strength, rng);
    }
    Ok((img, msk))
}
