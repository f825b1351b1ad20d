//! Optimizers with fully serializable state, so checkpoint/resume reproduces
//! a training trajectory bit-exactly.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use ndarray::ArrayD;

use crate::params::ParamStore;

/// Adam. Moments are allocated lazily per parameter on first gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: BTreeMap<String, ArrayD<f64>>,
    pub v: BTreeMap<String, ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &IndexMap<String, ArrayD<f64>>) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, g) in grads {
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let p = store.get_mut(name);
            ndarray::Zip::from(p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}

/// SGD with momentum and decoupled-from-nothing classic weight decay
/// (`g += wd * p` before the momentum update).
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub buf: BTreeMap<String, ArrayD<f64>>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            momentum,
            weight_decay,
            buf: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &IndexMap<String, ArrayD<f64>>) {
        for (name, g) in grads {
            let p_now = store.get(name).clone();
            let buf = self
                .buf
                .entry(name.clone())
                .or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            ndarray::Zip::from(&mut *buf)
                .and(g)
                .and(&p_now)
                .for_each(|b, &g, &p| {
                    *b = self.momentum * *b + g + self.weight_decay * p;
                });
            let p = store.get_mut(name);
            ndarray::Zip::from(p).and(&*buf).for_each(|p, &b| {
                *p -= self.lr * b;
            });
        }
    }
}

/// Polynomial decay `base * (1 - n/total)^gamma`; reaches 0 at `n == total`.
pub fn poly_lr(base: f64, step: u64, total: u64, gamma: f64) -> f64 {
    if total == 0 || step >= total {
        return 0.0;
    }
    let frac = 1.0 - step as f64 / total as f64;
    base * frac.powf(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_schedule_endpoints_and_midpoint() {
        assert_eq!(poly_lr(0.03, 0, 100, 0.9), 0.03);
        assert_eq!(poly_lr(0.03, 100, 100, 0.9), 0.0);
        let mid = poly_lr(0.03, 50, 100, 0.9);
        assert!((mid - 0.03 * 0.5f64.powf(0.9)).abs() < 1e-15);
        // monotone non-increasing
        let mut prev = f64::INFINITY;
        for n in 0..=100 {
            let lr = poly_lr(0.03, n, 100, 0.9);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let mut store = ParamStore::new();
        store.insert("p", ndarray::arr1(&[1.0, 2.0]).into_dyn());
        let before = store.get("p").clone();
        let mut grads = IndexMap::new();
        grads.insert("p".to_string(), ndarray::arr1(&[0.5, -0.5]).into_dyn());
        let mut adam = Adam::new(0.0, 0.0, 0.999);
        adam.step(&mut store, &grads);
        assert_eq!(store.get("p"), &before);
        let mut sgd = SgdMomentum::new(0.0, 0.9, 1e-4);
        sgd.step(&mut store, &grads);
        assert_eq!(store.get("p"), &before);
    }
}
