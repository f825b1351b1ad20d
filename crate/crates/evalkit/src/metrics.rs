//! Distributional metrics: Fréchet distance between feature Gaussians and
//! the inception score of class-probability vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::stats::FeatureStats;
use crate::{EvalError, Result};

const EIG_FLOOR: f64 = 1e-10;

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[(i, j)])
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(EIG_FLOOR).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between two feature Gaussians:
/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The matrix square root is taken via eigendecomposition of the symmetrized
/// product `S_b^(1/2) S_a S_b^(1/2)`; near-singular eigenvalues are floored,
/// so slightly non-PSD inputs are regularized rather than rejected.
pub fn fid(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(EvalError::DimMismatch {
            a: a.dim(),
            b: b.dim(),
        });
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(b.mean.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let sa = to_dmatrix(&a.cov);
    let sb = to_dmatrix(&b.cov);
    let sqrt_b = sym_sqrt(&sb);
    let inner = &sqrt_b * &sa * &sqrt_b;
    let inner_sym = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner_sym);
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).sum();
    let trace_a = sa.trace();
    let trace_b = sb.trace();
    Ok((mean_term + trace_a + trace_b - 2.0 * tr_sqrt).max(0.0))
}

/// Inception score `exp(E_x KL(p(y|x) || p(y)))` over rows of class
/// probabilities. Rows must sum to 1 (1e-6 tolerance); zero entries are
/// clamped at 1e-12 before taking logs.
pub fn inception_score(class_probs: &Array2<f64>) -> Result<f64> {
    let (n, k) = class_probs.dim();
    if n == 0 || k == 0 {
        return Err(EvalError::EmptyProbs);
    }
    for (row, r) in class_probs.rows().into_iter().enumerate() {
        let sum: f64 = r.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(EvalError::NotAProbability { row, sum });
        }
    }
    let clamp = |v: f64| v.max(1e-12);
    let marginal: Vec<f64> = (0..k)
        .map(|j| class_probs.column(j).sum() / n as f64)
        .collect();
    let mut kl_mean = 0.0;
    for r in class_probs.rows() {
        let mut kl = 0.0;
        for (j, &p) in r.iter().enumerate() {
            if p > 0.0 {
                kl += p * (clamp(p).ln() - clamp(marginal[j]).ln());
            }
        }
        kl_mean += kl;
    }
    kl_mean /= n as f64;
    Ok(kl_mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn stats(mean: Vec<f64>, cov: Array2<f64>) -> FeatureStats {
        FeatureStats {
            mean: Array1::from_vec(mean),
            cov,
            count: 100,
        }
    }

    #[test]
    fn identical_stats_give_zero() {
        let s = stats(vec![0.3, -0.7, 2.0], Array2::eye(3) * 0.5);
        let d = fid(&s, &s).unwrap();
        assert!(d.abs() < 1e-6, "fid(a,a) = {d}");
    }

    #[test]
    fn pure_mean_shift_with_identity_covs() {
        let a = stats(vec![0.0, 0.0], Array2::eye(2));
        let b = stats(vec![3.0, 4.0], Array2::eye(2));
        let d = fid(&a, &b).unwrap();
        assert!((d - 25.0).abs() < 1e-6, "fid = {d}, expected |v|^2 = 25");
    }

    #[test]
    fn diagonal_case_matches_scalar_formula() {
        let va = [1.0, 2.0, 0.5];
        let vb = [2.0, 1.0, 0.25];
        let ma = [0.0, 1.0, -1.0];
        let mb = [1.0, -1.0, 0.0];
        let a = stats(ma.to_vec(), Array2::from_diag(&Array1::from_vec(va.to_vec())));
        let b = stats(mb.to_vec(), Array2::from_diag(&Array1::from_vec(vb.to_vec())));
        let expected: f64 = (0..3)
            .map(|i| {
                (ma[i] - mb[i]).powi(2) + va[i] + vb[i] - 2.0 * (va[i] * vb[i]).sqrt()
            })
            .sum();
        let d = fid(&a, &b).unwrap();
        assert!((d - expected).abs() < 1e-9, "fid {d} vs {expected}");
    }

    #[test]
    fn fid_is_symmetric() {
        let a = stats(vec![0.1, 0.2], array![[1.0, 0.3], [0.3, 2.0]]);
        let b = stats(vec![-0.5, 1.0], array![[0.5, -0.1], [-0.1, 0.7]]);
        let ab = fid(&a, &b).unwrap();
        let ba = fid(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn is_one_for_identical_rows() {
        let probs = Array2::from_shape_fn((5, 4), |_| 0.25);
        let s = inception_score(&probs).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn is_k_for_one_hot_per_class() {
        let k = 6;
        let probs = Array2::from_shape_fn((k, k), |(i, j)| f64::from(i == j));
        let s = inception_score(&probs).unwrap();
        assert!((s - k as f64).abs() < 1e-6, "IS {s} vs {k}");
    }

    #[test]
    fn mixed_batch_matches_direct_summation() {
        let probs = array![[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]];
        let s = inception_score(&probs).unwrap();
        // direct small-N oracle
        let n = 3.0;
        let marginal = [
            (0.7 + 0.1 + 0.3) / n,
            (0.2 + 0.8 + 0.3) / n,
            (0.1 + 0.1 + 0.4) / n,
        ];
        let mut klm = 0.0;
        for r in probs.rows() {
            let mut kl = 0.0;
            for (j, &p) in r.iter().enumerate() {
                kl += p * (p / marginal[j]).ln();
            }
            klm += kl;
        }
        let expected = (klm / n).exp();
        assert!((s - expected).abs() < 1e-9);
    }

    #[test]
    fn is_bounded_by_class_count() {
        let probs = array![[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]];
        let s = inception_score(&probs).unwrap();
        assert!((1.0..=2.0).contains(&s));
    }

    #[test]
    fn dim_mismatch_rejected() {
        let a = stats(vec![0.0], Array2::eye(1));
        let b = stats(vec![0.0, 0.0], Array2::eye(2));
        assert!(matches!(fid(&a, &b), Err(EvalError::DimMismatch { .. })));
    }
}
