//! 2-D convolution via chunked im2col + GEMM. Chunking bounds the column
//! buffer so large inputs (whole-image inference) stay within memory.

use std::rc::Rc;

use ndarray::linalg::general_mat_mul;
use ndarray::{
    s, Array2, Array4, ArrayD, ArrayView2, ArrayView3, ArrayViewMut2, ArrayViewMut3, Axis, Ix1,
    Ix4,
};

use crate::tape::{Var, Vjp};

/// Stride and zero padding of a convolution.
#[derive(Debug, Clone, Copy)]
pub struct Conv2d {
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn same_3x3() -> Self {
        Self { stride: 1, pad: 1 }
    }

    pub fn pointwise() -> Self {
        Self { stride: 1, pad: 0 }
    }

    pub fn down_3x3() -> Self {
        Self { stride: 2, pad: 1 }
    }
}

fn out_len(len: usize, k: usize, stride: usize, pad: usize) -> usize {
    assert!(
        len + 2 * pad >= k,
        "kernel {k} larger than padded input {len}+2*{pad}"
    );
    (len + 2 * pad - k) / stride + 1
}

/// Cap the im2col buffer at roughly 32 MB of f64.
fn chunk_rows(ckk: usize, ow: usize, oh: usize) -> usize {
    let budget = 4_000_000usize;
    (budget / ckk.max(1) / ow.max(1)).clamp(1, oh)
}

fn im2col_chunk(
    x: &ArrayView3<'_, f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ow: usize,
    r0: usize,
    r1: usize,
    cols: &mut ArrayViewMut2<'_, f64>,
) {
    let (c_in, h, w) = x.dim();
    cols.fill(0.0);
    for c in 0..c_in {
        for dr in 0..kh {
            for dc in 0..kw {
                let row = (c * kh + dr) * kw + dc;
                let mut cols_row = cols.row_mut(row);
                let dst = cols_row.as_slice_mut().expect("cols row contiguous");
                for orow in r0..r1 {
                    let ir = (orow * stride + dr) as isize - pad as isize;
                    if ir < 0 || ir >= h as isize {
                        continue;
                    }
                    let src_row = x.slice(s![c, ir as usize, ..]);
                    let src = src_row.as_slice().expect("input row contiguous");
                    let base = (orow - r0) * ow;
                    if stride == 1 {
                        let oc0 = pad.saturating_sub(dc);
                        let oc1 = (w + pad - dc).min(ow);
                        if oc0 < oc1 {
                            dst[base + oc0..base + oc1]
                                .copy_from_slice(&src[oc0 + dc - pad..oc1 + dc - pad]);
                        }
                    } else {
                        for oc in 0..ow {
                            let ic = (oc * stride + dc) as isize - pad as isize;
                            if ic >= 0 && ic < w as isize {
                                dst[base + oc] = src[ic as usize];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im_chunk(
    gcols: &ArrayView2<'_, f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ow: usize,
    r0: usize,
    r1: usize,
    gx: &mut ArrayViewMut3<'_, f64>,
) {
    let (c_in, h, w) = gx.dim();
    for c in 0..c_in {
        for dr in 0..kh {
            for dc in 0..kw {
                let row = (c * kh + dr) * kw + dc;
                let src_row = gcols.row(row);
                let src = src_row.as_slice().expect("gcols row contiguous");
                for orow in r0..r1 {
                    let ir = (orow * stride + dr) as isize - pad as isize;
                    if ir < 0 || ir >= h as isize {
                        continue;
                    }
                    let base = (orow - r0) * ow;
                    let mut dst_row = gx.slice_mut(s![c, ir as usize, ..]);
                    let dst = dst_row.as_slice_mut().expect("gx row contiguous");
                    for oc in 0..ow {
                        let ic = (oc * stride + dc) as isize - pad as isize;
                        if ic >= 0 && ic < w as isize {
                            dst[ic as usize] += src[base + oc];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_value(
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    b: Option<&ArrayD<f64>>,
    spec: Conv2d,
) -> ArrayD<f64> {
    let x4 = x.view().into_dimensionality::<Ix4>().expect("x is 4-d");
    let w4 = w.view().into_dimensionality::<Ix4>().expect("w is 4-d");
    let (n, c_in, h, width) = x4.dim();
    let (c_out, c_in2, kh, kw) = w4.dim();
    assert_eq!(c_in, c_in2, "conv2d: input channels {c_in} vs weight {c_in2}");
    let oh = out_len(h, kh, spec.stride, spec.pad);
    let ow = out_len(width, kw, spec.stride, spec.pad);
    let ckk = c_in * kh * kw;
    let w_mat: ArrayView2<'_, f64> = w4
        .into_shape_with_order((c_out, ckk))
        .expect("weight reshape");

    let mut y = Array4::<f64>::zeros((n, c_out, oh, ow));
    let rows = chunk_rows(ckk, ow, oh);
    let mut cols = Array2::<f64>::zeros((ckk, rows * ow));
    let mut ychunk = Array2::<f64>::zeros((c_out, rows * ow));
    for i in 0..n {
        let xi = x4.index_axis(Axis(0), i);
        let mut r0 = 0;
        while r0 < oh {
            let r1 = (r0 + rows).min(oh);
            let px = (r1 - r0) * ow;
            let mut cols_v = cols.slice_mut(s![.., ..px]);
            im2col_chunk(&xi, kh, kw, spec.stride, spec.pad, ow, r0, r1, &mut cols_v);
            let mut yv = ychunk.slice_mut(s![.., ..px]);
            general_mat_mul(1.0, &w_mat, &cols_v.view(), 0.0, &mut yv);
            // copy per channel: the (r1-r0, ow) destination block is contiguous
            for c in 0..c_out {
                let mut dst_block = y.slice_mut(s![i, c, r0..r1, ..]);
                let dst = dst_block.as_slice_mut().expect("y block contiguous");
                let src_row = yv.row(c);
                dst.copy_from_slice(src_row.as_slice().expect("ychunk row contiguous"));
            }
            r0 = r1;
        }
        if let Some(bias) = b {
            let b1 = bias.view().into_dimensionality::<Ix1>().expect("bias 1-d");
            for c in 0..c_out {
                let mut ch = y.slice_mut(s![i, c, .., ..]);
                ch += b1[c];
            }
        }
    }
    y.into_dyn()
}

fn conv2d_backward(
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    g: &ArrayD<f64>,
    spec: Conv2d,
    need: (bool, bool, bool),
) -> (Option<ArrayD<f64>>, Option<ArrayD<f64>>, Option<ArrayD<f64>>) {
    let (need_gx, need_gw, need_gb) = need;
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let w4 = w.view().into_dimensionality::<Ix4>().unwrap();
    let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c_in, h, width) = x4.dim();
    let (c_out, _, kh, kw) = w4.dim();
    let (_, _, oh, ow) = g4.dim();
    let ckk = c_in * kh * kw;
    let w_mat = w4.into_shape_with_order((c_out, ckk)).unwrap();

    let mut gx = need_gx.then(|| Array4::<f64>::zeros((n, c_in, h, width)));
    let mut gw_mat = need_gw.then(|| Array2::<f64>::zeros((c_out, ckk)));
    let rows = chunk_rows(ckk, ow, oh);
    let mut cols = Array2::<f64>::zeros((ckk, rows * ow));
    let mut gchunk = Array2::<f64>::zeros((c_out, rows * ow));
    let mut gcols = Array2::<f64>::zeros((ckk, rows * ow));

    for i in 0..n {
        let xi = x4.index_axis(Axis(0), i);
        let mut r0 = 0;
        while r0 < oh {
            let r1 = (r0 + rows).min(oh);
            let px = (r1 - r0) * ow;
            for c in 0..c_out {
                let src_block = g4.slice(s![i, c, r0..r1, ..]);
                let src = src_block.as_slice().expect("g block contiguous");
                let mut dst_row = gchunk.row_mut(c);
                dst_row.as_slice_mut().unwrap()[..px].copy_from_slice(src);
            }
            let gv = gchunk.slice(s![.., ..px]);
            if need_gw {
                let mut cols_v = cols.slice_mut(s![.., ..px]);
                im2col_chunk(&xi, kh, kw, spec.stride, spec.pad, ow, r0, r1, &mut cols_v);
                let gw = gw_mat.as_mut().unwrap();
                general_mat_mul(1.0, &gv, &cols_v.view().t(), 1.0, gw);
            }
            if need_gx {
                let mut gcols_v = gcols.slice_mut(s![.., ..px]);
                general_mat_mul(1.0, &w_mat.t(), &gv, 0.0, &mut gcols_v);
                let gxa = gx.as_mut().unwrap();
                let mut gxi = gxa.index_axis_mut(Axis(0), i);
                col2im_chunk(
                    &gcols_v.view(),
                    kh,
                    kw,
                    spec.stride,
                    spec.pad,
                    ow,
                    r0,
                    r1,
                    &mut gxi,
                );
            }
            r0 = r1;
        }
    }

    let gb = need_gb.then(|| {
        let mut out = ndarray::Array1::<f64>::zeros(c_out);
        for c in 0..c_out {
            out[c] = g4.slice(s![.., c, .., ..]).sum();
        }
        out.into_dyn()
    });
    (
        gx.map(|a| a.into_dyn()),
        gw_mat.map(|a| a.into_shape_with_order(w.raw_dim()).unwrap().into_dyn()),
        gb,
    )
}

/// `y = conv2d(x, w) + b`, `x: (N, C_in, H, W)`, `w: (C_out, C_in, kh, kw)`,
/// `b: (C_out)`.
pub fn conv2d<'t>(x: &Var<'t>, w: &Var<'t>, b: Option<&Var<'t>>, spec: Conv2d) -> Var<'t> {
    let value = conv2d_value(&x.value, &w.value, b.map(|b| b.value()), spec);
    let (xt, wt) = (x.tracked, w.tracked);
    let bt = b.map(|b| b.tracked).unwrap_or(false);
    let mut parents = Vec::new();
    if xt {
        parents.push(x.id);
    }
    if wt {
        parents.push(w.id);
    }
    if bt {
        parents.push(b.unwrap().id);
    }
    let vjp: Option<Vjp> = if parents.is_empty() {
        None
    } else {
        let xv = Rc::clone(&x.value);
        let wv = Rc::clone(&w.value);
        Some(Box::new(move |g: &ArrayD<f64>| {
            let (gx, gw, gb) = conv2d_backward(&xv, &wv, g, spec, (xt, wt, bt));
            [gx, gw, gb].into_iter().flatten().collect()
        }) as Vjp)
    };
    let tracked = vjp.is_some();
    x.tape.push_node(value, parents, vjp, tracked)
}
