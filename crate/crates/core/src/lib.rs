//! Desk-scale pipeline for learning a conditional generative surrogate of a
//! motor-unit action potential simulator: a volume-conductor teacher, dataset
//! preparation, the encoder / expert-decoder / discriminator model, adversarial
//! training, inference-time morphing and sampling, and surface-EMG synthesis.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod generate;
pub mod emg;
pub mod model;
pub mod par;
pub mod teacher;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use par::Exec;
pub use tensor::{Float, Tensor4};
