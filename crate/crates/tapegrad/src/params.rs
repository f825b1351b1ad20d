//! Named parameter storage, spectral-normalization state, and the per-step
//! binding of parameters onto a tape.

use std::cell::RefCell;
use std::collections::BTreeMap;

use indexmap::IndexMap;
use ndarray::{Array1, ArrayD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ops;
use crate::tape::{Gradients, Tape, Var};

/// Power-iteration vectors for one spectrally normalized weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SnState {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

fn l2_normalize(v: &mut Array1<f64>) {
    let n = v.dot(v).sqrt().max(1e-12);
    v.mapv_inplace(|x| x / n);
}

/// Insertion-ordered collection of named parameter tensors. The order is the
/// creation order of the network definition and also the serialization order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, ArrayD<f64>>,
    sn: BTreeMap<String, SnState>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: ArrayD<f64>) {
        let prev = self.entries.insert(name.to_string(), value);
        assert!(prev.is_none(), "duplicate parameter name {name}");
    }

    /// Inserts a weight and registers spectral normalization for it. `u`/`v`
    /// start as random unit vectors drawn from `rng`.
    pub fn insert_spectral(&mut self, name: &str, value: ArrayD<f64>, rng: &mut impl Rng) {
        let o = value.shape()[0];
        let m = value.len() / o;
        self.insert(name, value);
        let mut u = Array1::from_shape_fn(o, |_| rng.sample::<f64, _>(StandardNormal));
        let mut v = Array1::from_shape_fn(m, |_| rng.sample::<f64, _>(StandardNormal));
        l2_normalize(&mut u);
        l2_normalize(&mut v);
        self.sn.insert(name.to_string(), SnState { u, v });
        // One immediate iteration so sigma = u~W v is non-negative from the
        // first use (u becomes normalize(W v)).
        self.update_spectral_one(name);
    }

    pub fn get(&self, name: &str) -> &ArrayD<f64> {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ArrayD<f64> {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar parameter count.
    pub fn value_count(&self) -> usize {
        self.entries.values().map(ArrayD::len).sum()
    }

    pub fn sn_state(&self, name: &str) -> Option<&SnState> {
        self.sn.get(name)
    }

    pub fn sn_states(&self) -> &BTreeMap<String, SnState> {
        &self.sn
    }

    pub fn set_sn_state(&mut self, name: &str, state: SnState) {
        self.sn.insert(name.to_string(), state);
    }

    /// One power-iteration step per spectrally normalized weight, updating
    /// `u`/`v` in place from the current weight values. Training mode calls
    /// this once per step before building the graph; evaluation skips it.
    pub fn update_spectral(&mut self) {
        let names: Vec<String> = self.sn.keys().cloned().collect();
        for name in names {
            self.update_spectral_one(&name);
        }
    }

    fn update_spectral_one(&mut self, name: &str) {
        let w = self.entries.get(name).expect("sn weight exists").clone();
        let o = w.shape()[0];
        let m = w.len() / o;
        let w_mat = w.view().into_shape_with_order((o, m)).unwrap();
        let state = self.sn.get_mut(name).unwrap();
        // v <- normalize(W^T u); u <- normalize(W v)
        let mut v_new = Array1::<f64>::zeros(m);
        for j in 0..m {
            v_new[j] = w_mat.column(j).dot(&state.u);
        }
        l2_normalize(&mut v_new);
        let mut u_new = Array1::<f64>::zeros(o);
        for i in 0..o {
            u_new[i] = w_mat.row(i).dot(&v_new);
        }
        l2_normalize(&mut u_new);
        state.u = u_new;
        state.v = v_new;
    }

    /// Exponential moving average update: `self = decay * self + (1-decay) * other`.
    pub fn ema_update(&mut self, other: &ParamStore, decay: f64) {
        for (name, value) in self.entries.iter_mut() {
            let src = other.get(name);
            value.zip_mut_with(src, |a, &b| *a = decay * *a + (1.0 - decay) * b);
        }
    }
}

/// Binds parameters from a store onto a tape, remembering which leaf belongs
/// to which name so gradients can be collected by name afterwards.
pub struct Session<'t, 's> {
    tape: &'t Tape,
    store: &'s ParamStore,
    bound: RefCell<IndexMap<String, Var<'t>>>,
    normalized: RefCell<IndexMap<String, Var<'t>>>,
    frozen: bool,
}

impl<'t, 's> Session<'t, 's> {
    pub fn new(tape: &'t Tape, store: &'s ParamStore) -> Self {
        Self {
            tape,
            store,
            bound: RefCell::new(IndexMap::new()),
            normalized: RefCell::new(IndexMap::new()),
            frozen: false,
        }
    }

    /// A session whose parameters are constants: no gradients flow to them.
    /// Used when a network participates in a loss that must not update it.
    pub fn frozen(tape: &'t Tape, store: &'s ParamStore) -> Self {
        Self {
            frozen: true,
            ..Self::new(tape, store)
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Binds the named parameter as a leaf (cached per session).
    pub fn param(&self, name: &str) -> Var<'t> {
        if let Some(v) = self.bound.borrow().get(name) {
            return v.clone();
        }
        let value = self.store.get(name).clone();
        let var = if self.frozen {
            self.tape.constant(value)
        } else {
            self.tape.leaf(value)
        };
        self.bound.borrow_mut().insert(name.to_string(), var.clone());
        var
    }

    /// Binds a conv weight, applying spectral normalization when registered.
    pub fn weight(&self, name: &str) -> Var<'t> {
        if let Some(v) = self.normalized.borrow().get(name) {
            return v.clone();
        }
        let raw = self.param(name);
        let var = match self.store.sn_state(name) {
            Some(state) => ops::spectral_norm(&raw, &state.u.view(), &state.v.view()),
            None => raw,
        };
        self.normalized
            .borrow_mut()
            .insert(name.to_string(), var.clone());
        var
    }

    /// Collects gradients for every bound parameter that received one.
    pub fn grads(&self, gradients: &Gradients) -> IndexMap<String, ArrayD<f64>> {
        let mut out = IndexMap::new();
        for (name, var) in self.bound.borrow().iter() {
            if let Some(g) = gradients.wrt(var) {
                out.insert(name.clone(), g.clone());
            }
        }
        out
    }
}
