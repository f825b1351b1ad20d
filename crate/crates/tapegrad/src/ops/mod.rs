//! Differentiable operations. Shapes follow the `(N, C, H, W)` convention for
//! activations; scalars are 0-d arrays. Shape violations are programming
//! errors and panic with context.

mod conv;
mod loss;
mod norm;
mod pointwise;
mod shape;

pub use conv::{conv2d, Conv2d};
pub use loss::{bce_with_logits, cross_entropy_map};
pub use norm::{group_count, group_norm, instance_norm, spectral_norm};
pub use pointwise::{
    add, add_scalar, leaky_relu, mul, relu, scale, select_mask, spade_modulate, sub, tanh,
};
pub use shape::{affine_channels, concat_channels, mean_all, sum_all, upsample_nearest_x2};
