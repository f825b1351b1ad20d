//! Per-level feature L2-norm maps, normalized to [0, 1] for export.

use gennet::FeaturePyramid;
use ndarray::Array2;

/// For every pyramid level, the per-position L2 norm over channels, divided
/// by the level's max (all-zero levels stay all-zero).
pub fn feature_norm_map(pyramid: &FeaturePyramid) -> Vec<Array2<f64>> {
    pyramid
        .levels
        .iter()
        .map(|level| {
            let (c, h, w) = level.dim();
            let mut out = Array2::<f64>::zeros((h, w));
            for r in 0..h {
                for col in 0..w {
                    let mut sq = 0.0;
                    for ch in 0..c {
                        let v = level[(ch, r, col)];
                        sq += v * v;
                    }
                    out[(r, col)] = sq.sqrt();
                }
            }
            let max = out.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                out.mapv_inplace(|v| v / max);
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn zero_features_give_zero_maps() {
        let levels = (0..6)
            .map(|i| Array3::<f64>::zeros((4, 1 << i, 1 << i)))
            .collect();
        let pyr = FeaturePyramid::new(levels).unwrap();
        for map in feature_norm_map(&pyr) {
            assert!(map.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_entry_norm_is_its_magnitude() {
        let mut levels: Vec<Array3<f64>> =
            (0..6).map(|i| Array3::zeros((2, 1 << i, 1 << i))).collect();
        levels[3][(1, 2, 3)] = -4.0;
        let pyr = FeaturePyramid::new(levels).unwrap();
        let maps = feature_norm_map(&pyr);
        // normalized by the max (4.0), so the single position is exactly 1
        assert_eq!(maps[3][(2, 3)], 1.0);
        assert_eq!(maps[3][(0, 0)], 0.0);
    }

    #[test]
    fn matches_brute_force_per_position() {
        let level0: Array3<f64> =
            Array3::from_shape_fn((3, 2, 2), |(c, r, col)| (c + 2 * r + col) as f64 * 0.5 - 1.0);
        let mut levels = vec![level0.clone()];
        for i in 1..6 {
            levels.push(Array3::zeros((3, 2 << i >> 1, 2 << i >> 1)));
        }
        // keep shapes simple: only level 0 is checked against brute force
        let pyr = FeaturePyramid::new(levels).unwrap();
        let maps = feature_norm_map(&pyr);
        let mut raw = Array2::<f64>::zeros((2, 2));
        for r in 0..2 {
            for c in 0..2 {
                let mut sq = 0.0;
                for ch in 0..3 {
                    sq += level0[(ch, r, c)] * level0[(ch, r, c)];
                }
                raw[(r, c)] = sq.sqrt();
            }
        }
        let max = raw.iter().cloned().fold(0.0, f64::max);
        for r in 0..2 {
            for c in 0..2 {
                assert!((maps[0][(r, c)] - raw[(r, c)] / max).abs() < 1e-12);
            }
        }
    }
}
