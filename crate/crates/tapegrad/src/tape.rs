//! The tape: a flat list of nodes in topological (creation) order. Each node
//! records its tracked parents and a vector-Jacobian product that maps the
//! node's output gradient to one gradient per parent.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::ArrayD;

pub(crate) type Vjp = Box<dyn Fn(&ArrayD<f64>) -> Vec<ArrayD<f64>>>;

pub(crate) struct Node {
    pub(crate) parents: Vec<usize>,
    pub(crate) vjp: Option<Vjp>,
}

/// Records the computation of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A value on a tape. Cloning is cheap (the payload is reference-counted).
#[derive(Clone)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
    pub(crate) value: Rc<ArrayD<f64>>,
    pub(crate) tracked: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A value that participates in the graph but receives no gradient.
    pub fn constant(&self, value: ArrayD<f64>) -> Var<'_> {
        self.push_node(value, Vec::new(), None, false)
    }

    /// A differentiable leaf (parameter or input under test).
    pub fn leaf(&self, value: ArrayD<f64>) -> Var<'_> {
        self.push_node(value, Vec::new(), None, true)
    }

    pub(crate) fn push_node(
        &self,
        value: ArrayD<f64>,
        parents: Vec<usize>,
        vjp: Option<Vjp>,
        tracked: bool,
    ) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node { parents, vjp });
        Var {
            tape: self,
            id,
            value: Rc::new(value),
            tracked,
        }
    }

    /// Reverse pass from a scalar `loss`. Intermediate gradients are freed as
    /// soon as they have been propagated; leaf gradients are retained.
    pub fn backward(&self, loss: &Var<'_>) -> Gradients {
        assert_eq!(
            loss.value.len(),
            1,
            "backward target must be a scalar, got shape {:?}",
            loss.shape()
        );
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<ArrayD<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(ArrayD::from_elem(loss.value.raw_dim(), 1.0));
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            let Some(vjp) = node.vjp.as_ref() else {
                continue; // leaf or constant: retain any accumulated gradient
            };
            let Some(g) = grads[id].take() else {
                continue; // no path from the loss to this node
            };
            let parent_grads = vjp(&g);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (pid, pg) in node.parents.iter().zip(parent_grads) {
                match &mut grads[*pid] {
                    Some(acc) => *acc += &pg,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &ArrayD<f64> {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn tracked(&self) -> bool {
        self.tracked
    }

    /// The scalar payload of a one-element value.
    pub fn scalar(&self) -> f64 {
        assert_eq!(self.value.len(), 1, "scalar() on shape {:?}", self.shape());
        *self.value.iter().next().unwrap()
    }

    /// Same value, detached from the graph: gradients stop here.
    pub fn detach(&self) -> Var<'t> {
        self.tape
            .push_node((*self.value).clone(), Vec::new(), None, false)
    }
}

/// Gradients produced by [`Tape::backward`], indexed by the `Var` they belong to.
pub struct Gradients {
    grads: Vec<Option<ArrayD<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, v: &Var<'_>) -> Option<&ArrayD<f64>> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: &Var<'_>) -> Option<ArrayD<f64>> {
        self.grads.get_mut(v.id).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;
    use ndarray::arr0;

    #[test]
    fn grad_of_product_sum() {
        let tape = Tape::new();
        let a = tape.leaf(arr0(3.0).into_dyn());
        let b = tape.leaf(arr0(4.0).into_dyn());
        // f = a*b + a  =>  df/da = b + 1, df/db = a
        let y = ops::add(&ops::mul(&a, &b), &a);
        let grads = tape.backward(&y);
        assert_eq!(grads.wrt(&a).unwrap()[[]], 5.0);
        assert_eq!(grads.wrt(&b).unwrap()[[]], 3.0);
    }

    #[test]
    fn detach_blocks_gradient() {
        let tape = Tape::new();
        let a = tape.leaf(arr0(2.0).into_dyn());
        let y = ops::mul(&a.detach(), &a); // only the direct factor contributes
        let grads = tape.backward(&y);
        assert_eq!(grads.wrt(&a).unwrap()[[]], 2.0);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::new();
        let a = tape.leaf(arr0(2.0).into_dyn());
        let c = tape.constant(arr0(5.0).into_dyn());
        let y = ops::mul(&a, &c);
        let grads = tape.backward(&y);
        assert_eq!(grads.wrt(&a).unwrap()[[]], 5.0);
        assert!(grads.wrt(&c).is_none());
    }
}
