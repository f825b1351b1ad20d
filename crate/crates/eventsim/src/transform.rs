//! Footprint transforms for pasted instances: nearest-neighbor scaling and
//! rotation, preserving label integrality.

use changecore::Rotation;
use ndarray::Array2;

/// Nearest-neighbor rescale of a boolean footprint; top-left convention.
pub(crate) fn scale_footprint(fp: &Array2<bool>, factor: f64) -> Array2<bool> {
    let (h, w) = fp.dim();
    let nh = ((h as f64 * factor).round() as usize).max(1);
    let nw = ((w as f64 * factor).round() as usize).max(1);
    Array2::from_shape_fn((nh, nw), |(r, c)| {
        let sr = (r * h / nh).min(h - 1);
        let sc = (c * w / nw).min(w - 1);
        fp[(sr, sc)]
    })
}

/// Rotates a footprint. Right angles are exact index permutations; free
/// angles inverse-rotate each destination cell around the center and sample
/// nearest.
pub(crate) fn rotate_footprint(fp: &Array2<bool>, rotation: Rotation) -> Array2<bool> {
    let (h, w) = fp.dim();
    match rotation {
        Rotation::R0 => fp.clone(),
        Rotation::R90 => Array2::from_shape_fn((w, h), |(r, c)| fp[(c, w - 1 - r)]),
        Rotation::R180 => Array2::from_shape_fn((h, w), |(r, c)| fp[(h - 1 - r, w - 1 - c)]),
        Rotation::R270 => Array2::from_shape_fn((w, h), |(r, c)| fp[(h - 1 - c, r)]),
        Rotation::Free(degrees) => {
            let theta = degrees.to_radians();
            let (sin, cos) = theta.sin_cos();
            let nh = (h as f64 * cos.abs() + w as f64 * sin.abs()).ceil() as usize;
            let nw = (h as f64 * sin.abs() + w as f64 * cos.abs()).ceil() as usize;
            let (nh, nw) = (nh.max(1), nw.max(1));
            let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
            let (ncy, ncx) = ((nh as f64 - 1.0) / 2.0, (nw as f64 - 1.0) / 2.0);
            Array2::from_shape_fn((nh, nw), |(r, c)| {
                // inverse rotation back into source coordinates
                let dy = r as f64 - ncy;
                let dx = c as f64 - ncx;
                let sy = cy + dy * cos + dx * sin;
                let sx = cx - dy * sin + dx * cos;
                let sr = sy.round();
                let sc = sx.round();
                if sr < 0.0 || sc < 0.0 || sr >= h as f64 || sc >= w as f64 {
                    false
                } else {
                    fp[(sr as usize, sc as usize)]
                }
            })
        }
    }
}

/// Crops a footprint to its tight bounding box, returning the relative pixel
/// list; `None` when the footprint is empty.
pub(crate) fn tighten(fp: &Array2<bool>) -> Option<Vec<(u32, u32)>> {
    let mut pixels = Vec::new();
    let mut r0 = usize::MAX;
    let mut c0 = usize::MAX;
    for ((r, c), &v) in fp.indexed_iter() {
        if v {
            r0 = r0.min(r);
            c0 = c0.min(c);
            pixels.push((r, c));
        }
    }
    if pixels.is_empty() {
        return None;
    }
    Some(
        pixels
            .into_iter()
            .map(|(r, c)| ((r - r0) as u32, (c - c0) as u32))
            .collect(),
    )
}
