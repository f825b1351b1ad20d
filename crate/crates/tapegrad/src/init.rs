//! Weight initialization. Values are drawn in row-major order so a given RNG
//! stream always produces the same tensors.

use ndarray::ArrayD;
use rand::Rng;
use rand_distr::StandardNormal;

/// He/Kaiming normal initialization for a conv weight `(O, I, kh, kw)` with a
/// leaky-rectifier gain.
pub fn he_normal(shape: &[usize], slope: f64, rng: &mut impl Rng) -> ArrayD<f64> {
    let fan_in: usize = shape[1..].iter().product();
    let std = (2.0 / ((1.0 + slope * slope) * fan_in as f64)).sqrt();
    normal(shape, std, rng)
}

pub fn normal(shape: &[usize], std: f64, rng: &mut impl Rng) -> ArrayD<f64> {
    let mut out = ArrayD::zeros(ndarray::IxDyn(shape));
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = z * std;
    }
    out
}

pub fn zeros(shape: &[usize]) -> ArrayD<f64> {
    ArrayD::zeros(ndarray::IxDyn(shape))
}

pub fn ones(shape: &[usize]) -> ArrayD<f64> {
    ArrayD::from_elem(ndarray::IxDyn(shape), 1.0)
}
