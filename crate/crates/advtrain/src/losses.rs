//! Adversarial losses in the (C+1)-class per-pixel cross-entropy form with
//! inverse-class-frequency balancing.
//!
//! Generator update: push every fake pixel toward its post-event semantic
//! class. Discriminator update: real pixels labeled by the time-t mask,
//! fake pixels labeled with the extra fake class (index C, appended last).
//! Both are weight-normalized averages, so a chance-level discriminator
//! scores exactly `ln(C+1)` per term.

use changecore::{ImageArray, SemanticMask};
use ndarray::{Array1, Array3, ArrayD, IxDyn};
use tapegrad::{ops, Session, Tape, Var};

use crate::discriminator::DiscriminatorParams;
use crate::Result;

/// The fake class is appended after the real classes.
pub fn fake_class_index(class_count: u16) -> usize {
    class_count as usize
}

/// Inverse-frequency class weights over a target map: `w_k = total / count_k`
/// for classes present, 0 for absent ones. A class occupying 1% of the pixels
/// weighs 100x one occupying all of them.
pub fn class_weights(targets: &Array3<usize>, num_classes: usize) -> Array1<f64> {
    let mut counts = vec![0usize; num_classes];
    for &t in targets.iter() {
        counts[t] += 1;
    }
    let total = targets.len() as f64;
    Array1::from_shape_fn(num_classes, |k| {
        if counts[k] > 0 {
            total / counts[k] as f64
        } else {
            0.0
        }
    })
}

pub(crate) fn labels_of(masks: &[&SemanticMask]) -> Array3<usize> {
    let (h, w) = masks[0].shape();
    Array3::from_shape_fn((masks.len(), h, w), |(n, r, c)| {
        masks[n].labels()[(r, c)] as usize
    })
}

pub(crate) fn fake_labels(n: usize, h: usize, w: usize, fake_class: usize) -> Array3<usize> {
    Array3::from_elem((n, h, w), fake_class)
}

/// Weighted (C+1)-class cross-entropy of discriminator logits against a
/// target map, with weights computed from that target map.
pub(crate) fn weighted_ce<'t>(
    logits: &Var<'t>,
    targets: &Array3<usize>,
    num_classes: usize,
) -> Var<'t> {
    let weights = class_weights(targets, num_classes);
    ops::cross_entropy_map(logits, targets, &weights.view())
}

/// Discriminator loss graph: mean of the real and fake terms. The fake image
/// must already be detached from the generator.
pub(crate) fn d_loss_graph<'t>(
    disc: &crate::discriminator::DiscriminatorNet,
    sess: &Session<'t, '_>,
    real_image: &Var<'t>,
    real_labels: &Array3<usize>,
    fake_image: &Var<'t>,
) -> Var<'t> {
    let k = disc.cfg.out_classes();
    let fake_class = k - 1;
    let d_real = disc.forward_graph(sess, real_image);
    let d_fake = disc.forward_graph(sess, fake_image);
    let sh = fake_image.shape().to_vec();
    let real_term = weighted_ce(&d_real, real_labels, k);
    let fake_targets = fake_labels(sh[0], sh[2], sh[3], fake_class);
    let fake_term = weighted_ce(&d_fake, &fake_targets, k);
    ops::scale(&ops::add(&real_term, &fake_term), 0.5)
}

/// Generator loss graph: cross-entropy of fake pixels toward their post-event
/// semantic classes (fake class weight is implicitly zero since it never
/// appears in the targets).
pub(crate) fn g_loss_graph<'t>(
    disc: &crate::discriminator::DiscriminatorNet,
    sess_d: &Session<'t, '_>,
    fake_image: &Var<'t>,
    labels_t1: &Array3<usize>,
) -> Var<'t> {
    let k = disc.cfg.out_classes();
    let d_fake = disc.forward_graph(sess_d, fake_image);
    weighted_ce(&d_fake, labels_t1, k)
}

fn batch1(image: &ImageArray) -> ArrayD<f64> {
    let (h, w) = image.shape();
    let chw = image.to_chw();
    let mut out = ArrayD::zeros(IxDyn(&[1, 3, h, w]));
    for ((c, r, col), &v) in chw.indexed_iter() {
        out[[0, c, r, col]] = v;
    }
    out
}

/// Value-level discriminator loss for one (real, fake) pair.
pub fn d_loss(
    real: (&ImageArray, &SemanticMask),
    fake: (&ImageArray, &SemanticMask),
    params: &DiscriminatorParams,
) -> Result<f64> {
    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let real_img = tape.constant(batch1(real.0));
    let fake_img = tape.constant(batch1(fake.0));
    let real_labels = labels_of(&[real.1]);
    let loss = d_loss_graph(&net, &sess, &real_img, &real_labels, &fake_img);
    Ok(loss.scalar())
}

/// Value-level generator loss for one fake pair.
pub fn g_loss(fake: (&ImageArray, &SemanticMask), params: &DiscriminatorParams) -> Result<f64> {
    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let fake_img = tape.constant(batch1(fake.0));
    let labels = labels_of(&[fake.1]);
    let loss = g_loss_graph(&net, &sess, &fake_img, &labels);
    Ok(loss.scalar())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_frequency_weights_are_exact() {
        // batch A: class 1 occupies 1% of 100 pixels
        let mut a = Array3::<usize>::zeros((1, 10, 10));
        a[(0, 0, 0)] = 1;
        let wa = class_weights(&a, 3);
        assert_eq!(wa[1], 100.0);
        // batch B: class 2 occupies 100%
        let b = Array3::<usize>::from_elem((1, 10, 10), 2);
        let wb = class_weights(&b, 3);
        assert_eq!(wb[2], 1.0);
        assert_eq!(wa[1] / wb[2], 100.0);
        // absent class gets zero weight
        assert_eq!(wa[2], 0.0);
    }
}
