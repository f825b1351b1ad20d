//! Normalization layers: group/instance normalization (no affine part; affine
//! and spatially-adaptive modulation are separate ops) and spectral weight
//! normalization.

use std::rc::Rc;

use ndarray::{Array1, Array2, ArrayD, ArrayView1};

use crate::tape::{Var, Vjp};

/// Group normalization over `(N, C, H, W)`: each `(sample, group)` block of
/// `C/groups * H * W` values is normalized to zero mean, unit variance
/// (biased variance, epsilon-guarded). Constant blocks normalize to zero.
pub fn group_norm<'t>(x: &Var<'t>, groups: usize, eps: f64) -> Var<'t> {
    let dims = x.shape().to_vec();
    assert_eq!(dims.len(), 4, "group_norm expects (N, C, H, W)");
    let (n, c) = (dims[0], dims[1]);
    assert!(
        groups >= 1 && c % groups == 0,
        "group_norm: {groups} groups do not divide {c} channels"
    );
    let m = (c / groups) * dims[2] * dims[3];

    let flat = x
        .value
        .view()
        .into_shape_with_order((n, groups, m))
        .expect("group_norm reshape");
    let mut xhat = ArrayD::<f64>::zeros(x.value.raw_dim());
    let mut inv = Array2::<f64>::zeros((n, groups));
    {
        let mut xhat_flat = xhat
            .view_mut()
            .into_shape_with_order((n, groups, m))
            .unwrap();
        for i in 0..n {
            for g in 0..groups {
                let block = flat.slice(ndarray::s![i, g, ..]);
                let mean = block.sum() / m as f64;
                let var = block.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
                let istd = 1.0 / (var + eps).sqrt();
                inv[(i, g)] = istd;
                let mut out = xhat_flat.slice_mut(ndarray::s![i, g, ..]);
                out.zip_mut_with(&block, |o, &v| *o = (v - mean) * istd);
            }
        }
    }

    let parents = if x.tracked { vec![x.id] } else { Vec::new() };
    let vjp: Option<Vjp> = if x.tracked {
        let yv = xhat.clone();
        let dims_c = dims.clone();
        Some(Box::new(move |g: &ArrayD<f64>| {
            let (n, _c) = (dims_c[0], dims_c[1]);
            let gm = g.view().into_shape_with_order((n, groups, m)).unwrap();
            let ym = yv.view().into_shape_with_order((n, groups, m)).unwrap();
            let mut gx = ArrayD::<f64>::zeros(g.raw_dim());
            {
                let mut gxm = gx.view_mut().into_shape_with_order((n, groups, m)).unwrap();
                for i in 0..n {
                    for gr in 0..groups {
                        let gb = gm.slice(ndarray::s![i, gr, ..]);
                        let yb = ym.slice(ndarray::s![i, gr, ..]);
                        let mean_g = gb.sum() / m as f64;
                        let mean_gy = gb
                            .iter()
                            .zip(yb.iter())
                            .map(|(&a, &b)| a * b)
                            .sum::<f64>()
                            / m as f64;
                        let istd = inv[(i, gr)];
                        let mut out = gxm.slice_mut(ndarray::s![i, gr, ..]);
                        for (o, (&gv, &yv2)) in out.iter_mut().zip(gb.iter().zip(yb.iter())) {
                            *o = istd * (gv - mean_g - yv2 * mean_gy);
                        }
                    }
                }
            }
            vec![gx]
        }) as Vjp)
    } else {
        None
    };
    let tracked = vjp.is_some();
    x.tape.push_node(xhat, parents, vjp, tracked)
}

/// Instance normalization: group normalization with one channel per group.
pub fn instance_norm<'t>(x: &Var<'t>, eps: f64) -> Var<'t> {
    let c = x.shape()[1];
    group_norm(x, c, eps)
}

/// Spectral weight normalization `y = w / sigma` with
/// `sigma = u^T W_mat v` computed from the frozen power-iteration vectors.
///
/// The gradient flows through both the numerator and `sigma` itself:
/// `gw = g/sigma - (<g, w> / sigma^2) * u v^T`.
pub fn spectral_norm<'t>(w: &Var<'t>, u: &ArrayView1<'_, f64>, v: &ArrayView1<'_, f64>) -> Var<'t> {
    let o = w.shape()[0];
    let m: usize = w.value.len() / o;
    assert_eq!(u.len(), o, "spectral_norm: u length");
    assert_eq!(v.len(), m, "spectral_norm: v length");
    let w_mat = w.value.view().into_shape_with_order((o, m)).unwrap();
    // sigma = u . (W v)
    let mut wv = Array1::<f64>::zeros(o);
    for i in 0..o {
        wv[i] = w_mat.row(i).dot(v);
    }
    let sigma = u.dot(&wv).max(1e-12);
    let value = w.value.mapv(|x| x / sigma);

    let parents = if w.tracked { vec![w.id] } else { Vec::new() };
    let vjp: Option<Vjp> = if w.tracked {
        let wval = Rc::clone(&w.value);
        let u = u.to_owned();
        let v = v.to_owned();
        Some(Box::new(move |g: &ArrayD<f64>| {
            let dot_gw: f64 = g.iter().zip(wval.iter()).map(|(&a, &b)| a * b).sum();
            let coef = dot_gw / (sigma * sigma);
            let mut gw = g.mapv(|x| x / sigma);
            {
                let mut gm = gw.view_mut().into_shape_with_order((o, m)).unwrap();
                for i in 0..o {
                    for j in 0..m {
                        gm[(i, j)] -= coef * u[i] * v[j];
                    }
                }
            }
            vec![gw]
        }) as Vjp)
    } else {
        None
    };
    let tracked = vjp.is_some();
    w.tape.push_node(value, parents, vjp, tracked)
}

/// Largest group count <= `max_groups` that divides `channels`.
pub fn group_count(channels: usize, max_groups: usize) -> usize {
    (1..=max_groups.min(channels))
        .rev()
        .find(|g| channels % g == 0)
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tape;
    use ndarray::Array4;

    #[test]
    fn group_norm_moments() {
        let tape = Tape::new();
        let x = Array4::from_shape_fn((2, 4, 3, 3), |(n, c, h, w)| {
            ((n * 131 + c * 37 + h * 11 + w * 3) % 17) as f64 * 0.31 - 1.0
        });
        let xv = tape.leaf(x.into_dyn());
        let y = group_norm(&xv, 2, 1e-5);
        let flat = y
            .value()
            .view()
            .into_shape_with_order((2, 2, 2 * 9))
            .unwrap();
        for i in 0..2 {
            for g in 0..2 {
                let b = flat.slice(ndarray::s![i, g, ..]);
                let mean = b.sum() / 18.0;
                let var = b.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / 18.0;
                assert!(mean.abs() < 1e-10, "mean {mean}");
                assert!((var - 1.0).abs() < 1e-3, "var {var}");
            }
        }
    }

    #[test]
    fn constant_block_normalizes_to_zero() {
        let tape = Tape::new();
        let x = Array4::from_elem((1, 2, 4, 4), 3.25);
        let xv = tape.leaf(x.into_dyn());
        let y = instance_norm(&xv, 1e-5);
        assert!(y.value().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn group_count_divides() {
        assert_eq!(group_count(512, 32), 32);
        assert_eq!(group_count(16, 32), 16);
        assert_eq!(group_count(154, 32), 22);
        assert_eq!(group_count(7, 32), 7);
        assert_eq!(group_count(13, 4), 1);
    }
}
