//! Change-label derivation and event-log replay.

use changecore::sample::{CHANGE_CREATE, CHANGE_NONE, CHANGE_REMOVE};
use changecore::{ChangeEvent, SemanticMask};
use ndarray::Array2;

use crate::{EventSimError, Result};

/// Applies an event log to a pre-event mask, reproducing the post-event mask
/// bit-exactly: removes write background, creates write their label, in log
/// order.
pub fn replay_events(mask_t: &SemanticMask, events: &[ChangeEvent]) -> Result<SemanticMask> {
    let mut labels = mask_t.labels().clone();
    for ev in events {
        match ev {
            ChangeEvent::Remove { pixels, .. } => {
                for &(r, c) in pixels {
                    labels[(r as usize, c as usize)] = 0;
                }
            }
            ChangeEvent::Create { label, pixels, .. } => {
                for &(r, c) in pixels {
                    labels[(r as usize, c as usize)] = *label;
                }
            }
        }
    }
    SemanticMask::new(labels, mask_t.class_count()).map_err(Into::into)
}

/// Per-pixel change label: 0 where the masks agree; among differing pixels,
/// 1 where a create event wrote last, 2 where a remove did. Differing pixels
/// not covered by any event (possible only for externally produced
/// transitions) fall back to 1 if the post-event pixel is foreground, else 2.
pub fn derive_change_label(
    mask_t: &SemanticMask,
    mask_t1: &SemanticMask,
    events: &[ChangeEvent],
) -> Result<Array2<u8>> {
    if mask_t.shape() != mask_t1.shape() {
        return Err(EventSimError::ShapeMismatch {
            a: mask_t.shape(),
            b: mask_t1.shape(),
        });
    }
    let (h, w) = mask_t.shape();
    let mut change = Array2::from_elem((h, w), CHANGE_NONE);
    for ev in events {
        let value = match ev {
            ChangeEvent::Create { .. } => CHANGE_CREATE,
            ChangeEvent::Remove { .. } => CHANGE_REMOVE,
        };
        for &(r, c) in ev.pixels() {
            change[(r as usize, c as usize)] = value;
        }
    }
    for ((r, c), ch) in change.indexed_iter_mut() {
        let same = mask_t.labels()[(r, c)] == mask_t1.labels()[(r, c)];
        if same {
            *ch = CHANGE_NONE;
        } else if *ch == CHANGE_NONE {
            *ch = if mask_t1.labels()[(r, c)] != 0 {
                CHANGE_CREATE
            } else {
                CHANGE_REMOVE
            };
        }
    }
    Ok(change)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_remove;
    use changecore::rng::{derive_rng, stream};
    use ndarray::Array2;

    fn nine_block() -> SemanticMask {
        let mut labels = Array2::zeros((6, 6));
        for r in 1..4 {
            for c in 1..4 {
                labels[(r, c)] = 1u8;
            }
        }
        SemanticMask::new(labels, 2).unwrap()
    }

    #[test]
    fn identical_masks_are_all_zero() {
        let mask = nine_block();
        let change = derive_change_label(&mask, &mask, &[]).unwrap();
        assert!(change.iter().all(|&v| v == CHANGE_NONE));
    }

    #[test]
    fn removing_nine_pixels_labels_nine_as_remove() {
        let mask = nine_block();
        let mut rng = derive_rng(20, &[stream::EVENT]);
        let (after, events) = simulate_remove(&mask, 1, &mut rng).unwrap();
        let change = derive_change_label(&mask, &after, &events).unwrap();
        let removed = change.iter().filter(|&&v| v == CHANGE_REMOVE).count();
        assert_eq!(removed, 9);
        assert!(change.iter().all(|&v| v != CHANGE_CREATE));
    }

    #[test]
    fn binary_view_equals_pixel_inequality() {
        let mask = nine_block();
        let mut rng = derive_rng(21, &[stream::EVENT]);
        let (after, events) = simulate_remove(&mask, 1, &mut rng).unwrap();
        let change = derive_change_label(&mask, &after, &events).unwrap();
        for ((r, c), &ch) in change.indexed_iter() {
            let differs = mask.labels()[(r, c)] != after.labels()[(r, c)];
            assert_eq!(ch != CHANGE_NONE, differs);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = nine_block();
        let b = SemanticMask::zeros(4, 4, 2).unwrap();
        assert!(matches!(
            derive_change_label(&a, &b, &[]),
            Err(EventSimError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn replay_reproduces_removal() {
        let mask = nine_block();
        let mut rng = derive_rng(22, &[stream::EVENT]);
        let (after, events) = simulate_remove(&mask, 1, &mut rng).unwrap();
        let replayed = replay_events(&mask, &events).unwrap();
        assert_eq!(replayed, after);
    }
}
