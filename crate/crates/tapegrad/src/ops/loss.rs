//! Per-pixel classification losses.

use ndarray::{Array3, Array4, ArrayD, ArrayView1, Ix4};

use crate::tape::{Var, Vjp};

/// Weighted per-pixel cross-entropy over `(N, K, H, W)` logits.
///
/// `target` holds class indices `< K`; `class_weights` has length `K`. The
/// loss is the weight-normalized average
/// `sum_px w[y_px] * CE_px / sum_px w[y_px]`, so uniform logits always score
/// `ln K` regardless of the weighting.
pub fn cross_entropy_map<'t>(
    logits: &Var<'t>,
    target: &Array3<usize>,
    class_weights: &ArrayView1<'_, f64>,
) -> Var<'t> {
    let sh = logits.shape().to_vec();
    assert_eq!(sh.len(), 4, "cross_entropy_map expects (N, K, H, W)");
    let (n, k, h, w) = (sh[0], sh[1], sh[2], sh[3]);
    assert_eq!(target.dim(), (n, h, w), "target shape mismatch");
    assert_eq!(class_weights.len(), k, "class weight length mismatch");

    let l4 = logits.value().view().into_dimensionality::<Ix4>().unwrap();
    let mut probs = Array4::<f64>::zeros((n, k, h, w));
    let mut loss_sum = 0.0;
    let mut weight_sum = 0.0;
    for i in 0..n {
        for r in 0..h {
            for c in 0..w {
                let y = target[(i, r, c)];
                assert!(y < k, "target class {y} out of range {k}");
                let mut maxv = f64::NEG_INFINITY;
                for cls in 0..k {
                    maxv = maxv.max(l4[(i, cls, r, c)]);
                }
                let mut denom = 0.0;
                for cls in 0..k {
                    denom += (l4[(i, cls, r, c)] - maxv).exp();
                }
                let lse = maxv + denom.ln();
                for cls in 0..k {
                    probs[(i, cls, r, c)] = (l4[(i, cls, r, c)] - lse).exp();
                }
                let wgt = class_weights[y];
                loss_sum += wgt * (lse - l4[(i, y, r, c)]);
                weight_sum += wgt;
            }
        }
    }
    assert!(
        weight_sum > 0.0,
        "cross_entropy_map: all targets have zero weight"
    );
    let value = ndarray::arr0(loss_sum / weight_sum).into_dyn();

    let parents = if logits.tracked() {
        vec![logits.id]
    } else {
        Vec::new()
    };
    let vjp: Option<Vjp> = if logits.tracked() {
        let target = target.clone();
        let weights = class_weights.to_owned();
        Some(Box::new(move |g: &ArrayD<f64>| {
            let gs = g[[]];
            let mut gl = Array4::<f64>::zeros((n, k, h, w));
            for i in 0..n {
                for r in 0..h {
                    for c in 0..w {
                        let y = target[(i, r, c)];
                        let coef = gs * weights[y] / weight_sum;
                        for cls in 0..k {
                            let p = probs[(i, cls, r, c)];
                            let indicator = if cls == y { 1.0 } else { 0.0 };
                            gl[(i, cls, r, c)] = coef * (p - indicator);
                        }
                    }
                }
            }
            vec![gl.into_dyn()]
        }) as Vjp)
    } else {
        None
    };
    let tracked = vjp.is_some();
    logits.tape.push_node(value, parents, vjp, tracked)
}

/// Mean binary cross-entropy with logits over `(N, 1, H, W)` against `{0,1}`
/// targets of shape `(N, H, W)`. Numerically stable formulation.
pub fn bce_with_logits<'t>(logits: &Var<'t>, target: &Array3<f64>) -> Var<'t> {
    let sh = logits.shape().to_vec();
    assert_eq!(sh.len(), 4, "bce_with_logits expects (N, 1, H, W)");
    assert_eq!(sh[1], 1, "bce_with_logits expects a single logit channel");
    let (n, h, w) = (sh[0], sh[2], sh[3]);
    assert_eq!(target.dim(), (n, h, w), "target shape mismatch");

    let l4 = logits.value().view().into_dimensionality::<Ix4>().unwrap();
    let count = (n * h * w) as f64;
    let mut loss_sum = 0.0;
    for i in 0..n {
        for r in 0..h {
            for c in 0..w {
                let l = l4[(i, 0, r, c)];
                let t = target[(i, r, c)];
                loss_sum += l.max(0.0) - l * t + (-l.abs()).exp().ln_1p();
            }
        }
    }
    let value = ndarray::arr0(loss_sum / count).into_dyn();

    let parents = if logits.tracked() {
        vec![logits.id]
    } else {
        Vec::new()
    };
    let vjp: Option<Vjp> = if logits.tracked() {
        let target = target.clone();
        let lv = std::rc::Rc::clone(&logits.value);
        Some(Box::new(move |g: &ArrayD<f64>| {
            let gs = g[[]] / count;
            let l4 = lv.view().into_dimensionality::<Ix4>().unwrap();
            let mut gl = Array4::<f64>::zeros((n, 1, h, w));
            for i in 0..n {
                for r in 0..h {
                    for c in 0..w {
                        let l = l4[(i, 0, r, c)];
                        let sig = 1.0 / (1.0 + (-l).exp());
                        gl[(i, 0, r, c)] = gs * (sig - target[(i, r, c)]);
                    }
                }
            }
            vec![gl.into_dyn()]
        }) as Vjp)
    } else {
        None
    };
    let tracked = vjp.is_some();
    logits.tape.push_node(value, parents, vjp, tracked)
}
