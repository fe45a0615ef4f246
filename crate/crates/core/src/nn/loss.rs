use crate::error::{shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Result of the fused softmax + cross-entropy layer.
pub struct SoftmaxXent<T> {
    pub probabilities: Tensor<T>,
    /// Mean negative log-likelihood over the batch.
    pub loss: T,
    /// `(p - onehot) / N`.
    pub grad_logits: Tensor<T>,
}

pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<SoftmaxXent<T>> {
    let (n, k) = logits.dims2()?;
    if k < 2 {
        return Err(shape_err!("softmax_xent: need at least 2 classes, got {k}"));
    }
    if targets.len() != n {
        return Err(shape_err!(
            "softmax_xent: {} targets for batch of {n}",
            targets.len()
        ));
    }
    if let Some(&index) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::TargetOutOfRange { index, classes: k });
    }
    let batch = T::from_usize(n).expect("batch fits");
    let mut probs = Vec::with_capacity(n * k);
    let mut grad = Vec::with_capacity(n * k);
    let mut total = T::zero();
    for (row, &target) in logits.data().chunks(k).zip(targets) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        total = total + (sum.ln() + max - row[target]);
        for (c, e) in exps.into_iter().enumerate() {
            let p = e / sum;
            probs.push(p);
            let onehot = if c == target { T::one() } else { T::zero() };
            grad.push((p - onehot) / batch);
        }
    }
    Ok(SoftmaxXent {
        probabilities: Tensor::from_vec(&[n, k], probs)?,
        loss: total / batch,
        grad_logits: Tensor::from_vec(&[n, k], grad)?,
    })
}
