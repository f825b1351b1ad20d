//! First and second moments of a feature distribution.

use ndarray::{Array1, Array2};

use crate::{EvalError, Result};

/// Mean vector and covariance matrix of a set of feature vectors.
#[derive(Debug, Clone)]
pub struct FeatureStats {
    pub mean: Array1<f64>,
    pub cov: Array2<f64>,
    pub count: usize,
}

impl FeatureStats {
    /// Estimates from rows of features `(n, d)`. Uses the unbiased (n-1)
    /// covariance; with fewer than two samples the covariance falls back to
    /// a tiny ridge so downstream matrix functions stay defined.
    pub fn from_rows(rows: &Array2<f64>) -> Result<Self> {
        let (n, d) = rows.dim();
        if n == 0 {
            return Err(EvalError::TooFewSamples(0));
        }
        let mut mean = Array1::<f64>::zeros(d);
        for row in rows.rows() {
            mean += &row;
        }
        mean /= n as f64;
        let mut cov = Array2::<f64>::zeros((d, d));
        if n >= 2 {
            for row in rows.rows() {
                let diff = &row.to_owned() - &mean;
                for i in 0..d {
                    for j in 0..d {
                        cov[(i, j)] += diff[i] * diff[j];
                    }
                }
            }
            cov /= (n - 1) as f64;
        } else {
            for i in 0..d {
                cov[(i, i)] = 1e-10;
            }
        }
        // exact symmetry regardless of accumulation order
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Self { mean, cov, count: n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mean_and_cov_of_simple_rows() {
        let rows = array![[1.0, 0.0], [3.0, 0.0], [2.0, 3.0]];
        let stats = FeatureStats::from_rows(&rows).unwrap();
        assert_eq!(stats.mean, array![2.0, 1.0]);
        assert_eq!(stats.count, 3);
        // var of [1,3,2] = 1, var of [0,0,3] = 3 (unbiased)
        assert!((stats.cov[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((stats.cov[(1, 1)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_is_regularized() {
        let rows = array![[1.0, 2.0]];
        let stats = FeatureStats::from_rows(&rows).unwrap();
        assert!(stats.cov[(0, 0)] > 0.0);
    }
}
