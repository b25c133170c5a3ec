//! Differentiable building blocks. Every op exposes a forward function and an
//! explicit adjoint; layers keep their weights in a [`ParamSet`] and callers
//! keep whatever activations the backward pass needs.

pub mod activation;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod params;
pub mod reparam;
pub mod resample;

pub use activation::{leaky_relu, leaky_relu_backward, sigmoid, softmax, softmax_backward, PRelu, DISC_LEAKY_SLOPE};
pub use conv::{conv3d, conv3d_backward, Conv3d, ConvGeom};
pub use gradcheck::{grad_check, grad_check_piecewise, GradCheckOptions, GradCheckReport};
pub use linear::{linear, linear_backward, Linear};
pub use params::{Grads, Init, Param, ParamId, ParamSet};
pub use reparam::{reparameterize, reparameterize_backward};
pub use resample::{
    centre_offset, fit_time, fit_time_backward, resize3, resize3_backward, resize_axis, resize_axis_backward, scaled_len,
    temporal_resample, temporal_resample_backward, MAX_TIME_FACTOR, MIN_TIME_FACTOR,
};
