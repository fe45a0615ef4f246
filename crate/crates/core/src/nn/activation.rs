use crate::error::{shape_err, Result};
use crate::tensor::{Scalar, Tensor};

pub struct ReluCache {
    /// `true` where the input was strictly positive.
    mask: Vec<bool>,
    shape: Vec<usize>,
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, ReluCache) {
    let mask: Vec<bool> = input.data().iter().map(|&x| x > T::zero()).collect();
    let out = input.map(|x| if x > T::zero() { x } else { T::zero() });
    (
        out,
        ReluCache {
            mask,
            shape: input.shape().to_vec(),
        },
    )
}

/// Upstream gradient times the 0/1 activation mask (derivative at 0 is 0).
pub fn relu_backward<T: Scalar>(cache: ReluCache, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_output.shape() != cache.shape.as_slice() {
        return Err(shape_err!(
            "relu backward: gradient {:?}, expected {:?}",
            grad_output.shape(),
            cache.shape
        ));
    }
    let data = grad_output
        .data()
        .iter()
        .zip(&cache.mask)
        .map(|(&g, &m)| if m { g } else { T::zero() })
        .collect();
    Tensor::from_vec(&cache.shape, data)
}
