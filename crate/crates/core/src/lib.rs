//! Compact texture CNN toolkit.
//!
//! - [`nn`]: layer kernels with explicit forward/backward passes
//! - [`model`]: the two-convolution texture network with energy pooling
//! - [`pipeline`]: log-polar unfolding, patch slicing, bicubic upscaling and
//!   augmentation
//! - [`baselines`]: LPQ and Haralick descriptors with a linear classifier
//! - [`harness`]: synthetic data, splits, training loop and reports

pub mod baselines;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
