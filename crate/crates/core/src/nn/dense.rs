use crate::error::{shape_err, Result};
use crate::tensor::{Scalar, Tensor};

pub struct DenseCache<T> {
    input: Tensor<T>,
    weights: Tensor<T>,
}

pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Affine map `x W + b` for `x: [N, D]`, `W: [D, M]`, `b: [M]`.
pub fn dense<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    let (n, d) = input.dims2()?;
    let (wd, m) = weights.dims2()?;
    if wd != d {
        return Err(shape_err!("dense: input width {d}, weights expect {wd}"));
    }
    if bias.shape() != [m] {
        return Err(shape_err!(
            "dense: bias shape {:?}, expected [{m}]",
            bias.shape()
        ));
    }
    let mut out: Vec<T> = (0..n).flat_map(|_| bias.data().iter().copied()).collect();
    T::gemm(
        n,
        d,
        m,
        T::one(),
        input.data(),
        (d as isize, 1),
        weights.data(),
        (m as isize, 1),
        T::one(),
        &mut out,
    );
    Ok((
        Tensor::from_vec(&[n, m], out)?,
        DenseCache {
            input: input.clone(),
            weights: weights.clone(),
        },
    ))
}

pub fn dense_backward<T: Scalar>(
    cache: DenseCache<T>,
    grad_output: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (n, d) = cache.input.dims2()?;
    let (_, m) = cache.weights.dims2()?;
    if grad_output.shape() != [n, m] {
        return Err(shape_err!(
            "dense backward: gradient {:?}, expected [{n}, {m}]",
            grad_output.shape()
        ));
    }
    let g = grad_output.data();
    let mut dx = vec![T::zero(); n * d];
    T::gemm(
        n,
        m,
        d,
        T::one(),
        g,
        (m as isize, 1),
        cache.weights.data(),
        (1, m as isize),
        T::zero(),
        &mut dx,
    );
    let mut dw = vec![T::zero(); d * m];
    T::gemm(
        d,
        n,
        m,
        T::one(),
        cache.input.data(),
        (1, d as isize),
        g,
        (m as isize, 1),
        T::zero(),
        &mut dw,
    );
    let mut db = vec![T::zero(); m];
    for row in g.chunks(m) {
        for (acc, &v) in db.iter_mut().zip(row) {
            *acc = *acc + v;
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(&[n, d], dx)?,
        weights: Tensor::from_vec(&[d, m], dw)?,
        bias: Tensor::from_vec(&[m], db)?,
    })
}
