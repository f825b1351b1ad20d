//! Feature-leakage diagnostic: how much the synthesized post-event image
//! differs from the pre-event image, split by changed vs unchanged regions.
//! A generator that merely copies the pre-event image scores near-zero
//! everywhere and a ratio near 1; correct change synthesis drives the ratio
//! above the unchanged baseline.

use changecore::BitemporalSample;

/// Region-wise mean absolute differences and their ratio. A field is absent
/// when its region is empty; the ratio additionally requires a strictly
/// positive unchanged difference.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub changed_diff: Option<f64>,
    pub unchanged_diff: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn leakage_metric(sample: &BitemporalSample) -> LeakageReport {
    let binary = sample.binary_change();
    let (h, w) = sample.image_t.shape();
    let mut changed_sum = 0.0;
    let mut changed_n = 0usize;
    let mut unchanged_sum = 0.0;
    let mut unchanged_n = 0usize;
    for r in 0..h {
        for c in 0..w {
            let mut diff = 0.0;
            for ch in 0..3 {
                diff += (sample.image_t.pixels()[(r, c, ch)]
                    - sample.image_t1.pixels()[(r, c, ch)])
                    .abs();
            }
            diff /= 3.0;
            if binary[(r, c)] != 0 {
                changed_sum += diff;
                changed_n += 1;
            } else {
                unchanged_sum += diff;
                unchanged_n += 1;
            }
        }
    }
    let changed_diff = (changed_n > 0).then(|| changed_sum / changed_n as f64);
    let unchanged_diff = (unchanged_n > 0).then(|| unchanged_sum / unchanged_n as f64);
    let ratio = match (changed_diff, unchanged_diff) {
        (Some(c), Some(u)) if u > 1e-12 => Some(c / u),
        _ => None,
    };
    LeakageReport {
        changed_diff,
        unchanged_diff,
        ratio,
    }
}
