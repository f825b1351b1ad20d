use ndarray::{s, ArrayD, Ix4};

use crate::tape::{Var, Vjp};

/// Concatenates along the channel axis of `(N, C, H, W)` values.
pub fn concat_channels<'t>(parts: &[&Var<'t>]) -> Var<'t> {
    assert!(!parts.is_empty(), "concat_channels: empty input");
    let tape = parts[0].tape;
    let first = parts[0].shape().to_vec();
    assert_eq!(first.len(), 4, "concat_channels expects (N, C, H, W)");
    let mut channels = Vec::with_capacity(parts.len());
    let mut total_c = 0;
    for p in parts {
        let sh = p.shape();
        assert_eq!(sh.len(), 4);
        assert_eq!(
            (sh[0], sh[2], sh[3]),
            (first[0], first[2], first[3]),
            "concat_channels: incompatible shapes"
        );
        channels.push(sh[1]);
        total_c += sh[1];
    }
    let (n, h, w) = (first[0], first[2], first[3]);
    let mut value = ArrayD::<f64>::zeros(ndarray::IxDyn(&[n, total_c, h, w]));
    {
        let mut v4 = value.view_mut().into_dimensionality::<Ix4>().unwrap();
        let mut c0 = 0;
        for p in parts {
            let c = p.shape()[1];
            let src = p.value().view().into_dimensionality::<Ix4>().unwrap();
            v4.slice_mut(s![.., c0..c0 + c, .., ..]).assign(&src);
            c0 += c;
        }
    }

    let tracked_flags: Vec<bool> = parts.iter().map(|p| p.tracked()).collect();
    let parents: Vec<usize> = parts
        .iter()
        .filter(|p| p.tracked())
        .map(|p| p.id)
        .collect();
    let vjp: Option<Vjp> = (!parents.is_empty()).then(|| {
        let channels = channels.clone();
        Box::new(move |g: &ArrayD<f64>| {
            let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
            let mut out = Vec::new();
            let mut c0 = 0;
            for (idx, &c) in channels.iter().enumerate() {
                if tracked_flags[idx] {
                    out.push(g4.slice(s![.., c0..c0 + c, .., ..]).to_owned().into_dyn());
                }
                c0 += c;
            }
            out
        }) as Vjp
    });
    let tracked = vjp.is_some();
    tape.push_node(value, parents, vjp, tracked)
}

/// Nearest-neighbor 2x upsampling of `(N, C, H, W)`.
pub fn upsample_nearest_x2<'t>(x: &Var<'t>) -> Var<'t> {
    let sh = x.shape().to_vec();
    assert_eq!(sh.len(), 4, "upsample expects (N, C, H, W)");
    let (n, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
    let x4 = x.value().view().into_dimensionality::<Ix4>().unwrap();
    let mut value = ArrayD::<f64>::zeros(ndarray::IxDyn(&[n, c, 2 * h, 2 * w]));
    {
        let mut v4 = value.view_mut().into_dimensionality::<Ix4>().unwrap();
        for i in 0..n {
            for ch in 0..c {
                for r in 0..h {
                    for col in 0..w {
                        let v = x4[(i, ch, r, col)];
                        v4[(i, ch, 2 * r, 2 * col)] = v;
                        v4[(i, ch, 2 * r, 2 * col + 1)] = v;
                        v4[(i, ch, 2 * r + 1, 2 * col)] = v;
                        v4[(i, ch, 2 * r + 1, 2 * col + 1)] = v;
                    }
                }
            }
        }
    }
    let parents = if x.tracked() { vec![x.id] } else { Vec::new() };
    let vjp: Option<Vjp> = x.tracked().then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
            let mut gx = ndarray::Array4::<f64>::zeros((n, c, h, w));
            for i in 0..n {
                for ch in 0..c {
                    for r in 0..h {
                        for col in 0..w {
                            gx[(i, ch, r, col)] = g4[(i, ch, 2 * r, 2 * col)]
                                + g4[(i, ch, 2 * r, 2 * col + 1)]
                                + g4[(i, ch, 2 * r + 1, 2 * col)]
                                + g4[(i, ch, 2 * r + 1, 2 * col + 1)];
                        }
                    }
                }
            }
            vec![gx.into_dyn()]
        }) as Vjp
    });
    let tracked = vjp.is_some();
    x.tape.push_node(value, parents, vjp, tracked)
}

/// Per-channel affine `y = x * gamma[c] + beta[c]` over `(N, C, H, W)`.
pub fn affine_channels<'t>(x: &Var<'t>, gamma: &Var<'t>, beta: &Var<'t>) -> Var<'t> {
    let sh = x.shape().to_vec();
    assert_eq!(sh.len(), 4, "affine_channels expects (N, C, H, W)");
    let c = sh[1];
    assert_eq!(gamma.shape(), [c]);
    assert_eq!(beta.shape(), [c]);
    let g1 = gamma.value().view().into_dimensionality::<ndarray::Ix1>().unwrap();
    let b1 = beta.value().view().into_dimensionality::<ndarray::Ix1>().unwrap();
    let mut value = x.value().to_owned();
    {
        let mut v4 = value.view_mut().into_dimensionality::<Ix4>().unwrap();
        for ch in 0..c {
            let mut sl = v4.slice_mut(s![.., ch, .., ..]);
            sl.mapv_inplace(|v| v * g1[ch] + b1[ch]);
        }
    }
    let (xt, gt, bt) = (x.tracked(), gamma.tracked(), beta.tracked());
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
    let vjp: Option<Vjp> = if parents.is_empty() {
        None
    } else {
        let xv = std::rc::Rc::clone(&x.value);
        let gv = gamma.value().to_owned();
        Some(Box::new(move |g: &ArrayD<f64>| {
            let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
            let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
            let gvec = gv.view().into_dimensionality::<ndarray::Ix1>().unwrap();
            let mut out = Vec::new();
            if xt {
                let mut gx = g.to_owned();
                let mut gx4 = gx.view_mut().into_dimensionality::<Ix4>().unwrap();
                for ch in 0..c {
                    let mut sl = gx4.slice_mut(s![.., ch, .., ..]);
                    sl.mapv_inplace(|v| v * gvec[ch]);
                }
                drop(gx4);
                out.push(gx);
            }
            if gt {
                let mut gg = ndarray::Array1::<f64>::zeros(c);
                for ch in 0..c {
                    gg[ch] = (&g4.slice(s![.., ch, .., ..]) * &x4.slice(s![.., ch, .., ..])).sum();
                }
                out.push(gg.into_dyn());
            }
            if bt {
                let mut gb = ndarray::Array1::<f64>::zeros(c);
                for ch in 0..c {
                    gb[ch] = g4.slice(s![.., ch, .., ..]).sum();
                }
                out.push(gb.into_dyn());
            }
            out
        }) as Vjp)
    };
    let tracked = vjp.is_some();
    x.tape.push_node(value, parents, vjp, tracked)
}

/// Mean over all elements, yielding a 0-d scalar.
pub fn mean_all<'t>(x: &Var<'t>) -> Var<'t> {
    let count = x.value().len() as f64;
    let value = ndarray::arr0(x.value().sum() / count).into_dyn();
    let parents = if x.tracked() { vec![x.id] } else { Vec::new() };
    let dim = x.value().raw_dim();
    let vjp: Option<Vjp> = x.tracked().then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let gs = g[[]] / count;
            vec![ArrayD::from_elem(dim.clone(), gs)]
        }) as Vjp
    });
    let tracked = vjp.is_some();
    x.tape.push_node(value, parents, vjp, tracked)
}

/// Sum over all elements, yielding a 0-d scalar.
pub fn sum_all<'t>(x: &Var<'t>) -> Var<'t> {
    let value = ndarray::arr0(x.value().sum()).into_dyn();
    let parents = if x.tracked() { vec![x.id] } else { Vec::new() };
    let dim = x.value().raw_dim();
    let vjp: Option<Vjp> = x.tracked().then(|| {
        Box::new(move |g: &ArrayD<f64>| {
            let gs = g[[]];
            vec![ArrayD::from_elem(dim.clone(), gs)]
        }) as Vjp
    });
    let tracked = vjp.is_some();
    x.tape.push_node(value, parents, vjp, tracked)
}
