use std::rc::Rc;

use ndarray::{ArrayD, Zip};

use crate::tape::{Var, Vjp};

fn assert_same_shape(a: &Var<'_>, b: &Var<'_>, op: &str) {
    assert_eq!(
        a.shape(),
        b.shape(),
        "{op}: shape mismatch {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
}

pub fn add<'t>(a: &Var<'t>, b: &Var<'t>) -> Var<'t> {
    assert_same_shape(a, b, "add");
    let value = &*a.value + &*b.value;
    let (at, bt) = (a.tracked, b.tracked);
    let mut parents = Vec::new();
    if at {
        parents.push(a.id);
    }
    if bt {
        parents.push(b.id);
    }
    let vjp: Option<Vjp> = (!parents.is_empty()).then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let mut out = Vec::new();
            if at {
                out.push(g.clone());
            }
            if bt {
                out.push(g.clone());
            }
            out
        }) as Vjp
    });
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

pub fn sub<'t>(a: &Var<'t>, b: &Var<'t>) -> Var<'t> {
    assert_same_shape(a, b, "sub");
    let value = &*a.value - &*b.value;
    let (at, bt) = (a.tracked, b.tracked);
    let mut parents = Vec::new();
    if at {
        parents.push(a.id);
    }
    if bt {
        parents.push(b.id);
    }
    let vjp: Option<Vjp> = (!parents.is_empty()).then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let mut out = Vec::new();
            if at {
                out.push(g.clone());
            }
            if bt {
                out.push(g.mapv(|v| -v));
            }
            out
        }) as Vjp
    });
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

pub fn mul<'t>(a: &Var<'t>, b: &Var<'t>) -> Var<'t> {
    assert_same_shape(a, b, "mul");
    let value = &*a.value * &*b.value;
    let (at, bt) = (a.tracked, b.tracked);
    let (av, bv) = (Rc::clone(&a.value), Rc::clone(&b.value));
    let mut parents = Vec::new();
    if at {
        parents.push(a.id);
    }
    if bt {
        parents.push(b.id);
    }
    let vjp: Option<Vjp> = (!parents.is_empty()).then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let mut out = Vec::new();
            if at {
                out.push(g * &*bv);
            }
            if bt {
                out.push(g * &*av);
            }
            out
        }) as Vjp
    });
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

pub fn scale<'t>(a: &Var<'t>, k: f64) -> Var<'t> {
    let value = a.value.mapv(|v| v * k);
    let parents = if a.tracked { vec![a.id] } else { Vec::new() };
    let vjp: Option<Vjp> =
        a.tracked.then(|| Box::new(move |g: &ArrayD<f64>| vec![g.mapv(|v| v * k)]) as Vjp);
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

pub fn add_scalar<'t>(a: &Var<'t>, k: f64) -> Var<'t> {
    let value = a.value.mapv(|v| v + k);
    let parents = if a.tracked { vec![a.id] } else { Vec::new() };
    let vjp: Option<Vjp> = a.tracked.then(|| Box::new(|g: &ArrayD<f64>| vec![g.clone()]) as Vjp);
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

pub fn leaky_relu<'t>(a: &Var<'t>, slope: f64) -> Var<'t> {
    let value = a.value.mapv(|v| if v >= 0.0 { v } else { slope * v });
    let av = Rc::clone(&a.value);
    let parents = if a.tracked { vec![a.id] } else { Vec::new() };
    let vjp: Option<Vjp> = a.tracked.then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let mut gx = g.clone();
            Zip::from(&mut gx).and(&*av).for_each(|gv, &x| {
                if x < 0.0 {
                    *gv *= slope;
                }
            });
            vec![gx]
        }) as Vjp
    });
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

pub fn relu<'t>(a: &Var<'t>) -> Var<'t> {
    leaky_relu(a, 0.0)
}

pub fn tanh<'t>(a: &Var<'t>) -> Var<'t> {
    let value = a.value.mapv(f64::tanh);
    let parents = if a.tracked { vec![a.id] } else { Vec::new() };
    let vjp: Option<Vjp> = if a.tracked {
        let yv = value.clone();
        Some(Box::new(move |g: &ArrayD<f64>| {
            let mut gx = g.clone();
            Zip::from(&mut gx).and(&yv).for_each(|gv, &y| {
                *gv *= 1.0 - y * y;
            });
            vec![gx]
        }) as Vjp)
    } else {
        None
    };
    let tracked = vjp.is_some();
    a.tape.push_node(value, parents, vjp, tracked)
}

/// Exact per-position selection: `on` where `mask > 0.5`, `off` elsewhere.
///
/// `mask` has shape `(N, 1, H, W)` and broadcasts over channels. No
/// arithmetic blending takes place, so selected values pass through
/// bit-exactly.
pub fn select_mask<'t>(off: &Var<'t>, on: &Var<'t>, mask: &ArrayD<f64>) -> Var<'t> {
    assert_same_shape(off, on, "select_mask");
    let dims = off.shape().to_vec();
    assert_eq!(dims.len(), 4, "select_mask expects (N, C, H, W)");
    assert_eq!(
        mask.shape(),
        [dims[0], 1, dims[2], dims[3]],
        "select_mask: mask shape {:?} does not match (N, 1, H, W) of {:?}",
        mask.shape(),
        dims
    );
    let select = |g_on: &ArrayD<f64>, g_off: &ArrayD<f64>, mask: &ArrayD<f64>| -> ArrayD<f64> {
        let mut out = g_off.clone();
        let (n, c, h, w) = (dims[0], dims[1], dims[2], dims[3]);
        for i in 0..n {
            for ch in 0..c {
                for r in 0..h {
                    for col in 0..w {
                        if mask[[i, 0, r, col]] > 0.5 {
                            out[[i, ch, r, col]] = g_on[[i, ch, r, col]];
                        }
                    }
                }
            }
        }
        out
    };
    let value = select(&on.value, &off.value, mask);
    let (off_t, on_t) = (off.tracked, on.tracked);
    let mut parents = Vec::new();
    if off_t {
        parents.push(off.id);
    }
    if on_t {
        parents.push(on.id);
    }
    let vjp: Option<Vjp> = if parents.is_empty() {
        None
    } else {
        let mask = mask.clone();
        let dims2 = dims.clone();
        Some(Box::new(move |g: &ArrayD<f64>| {
            let mut out = Vec::new();
            let pick = |take_on: bool| -> ArrayD<f64> {
                let mut grad = ArrayD::zeros(g.raw_dim());
                let (n, c, h, w) = (dims2[0], dims2[1], dims2[2], dims2[3]);
                for i in 0..n {
                    for ch in 0..c {
                        for r in 0..h {
                            for col in 0..w {
                                let on_pos = mask[[i, 0, r, col]] > 0.5;
                                if on_pos == take_on {
                                    grad[[i, ch, r, col]] = g[[i, ch, r, col]];
                                }
                            }
                        }
                    }
                }
                grad
            };
            if off_t {
                out.push(pick(false));
            }
            if on_t {
                out.push(pick(true));
            }
            out
        }) as Vjp)
    };
    let tracked = vjp.is_some();
    off.tape.push_node(value, parents, vjp, tracked)
}

/// Spatially-adaptive modulation `y = x * (1 + gamma) + beta` with per-pixel
/// gamma/beta maps of the same shape as `x`.
pub fn spade_modulate<'t>(x: &Var<'t>, gamma: &Var<'t>, beta: &Var<'t>) -> Var<'t> {
    assert_same_shape(x, gamma, "spade_modulate");
    assert_same_shape(x, beta, "spade_modulate");
    let mut value = (&*x.value).clone();
    Zip::from(&mut value)
        .and(&*gamma.value)
        .and(&*beta.value)
        .for_each(|v, &gm, &bt| *v = *v * (1.0 + gm) + bt);
    let (xt, gt, bt) = (x.tracked, gamma.tracked, beta.tracked);
    let (xv, gv) = (Rc::clone(&x.value), Rc::clone(&gamma.value));
    let mut parents = Vec::new();
    if xt {
        parents.push(x.id);
    }
    if gt {
        parents.push(gamma.id);
    }
    if bt {
        parents.push(beta.id);
    }
    let vjp: Option<Vjp> = (!parents.is_empty()).then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let mut out = Vec::new();
            if xt {
                let mut gx = g.clone();
                Zip::from(&mut gx).and(&*gv).for_each(|v, &gm| *v *= 1.0 + gm);
                out.push(gx);
            }
            if gt {
                out.push(g * &*xv);
            }
            if bt {
                out.push(g.clone());
            }
            out
        }) as Vjp
    });
    let tracked = vjp.is_some();
    x.tape.push_node(value, parents, vjp, tracked)
}
