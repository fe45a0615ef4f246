use crate::error::{shape_err, Result};
use crate::tensor::{Scalar, Tensor};

pub struct ConcatCache {
    widths: Vec<usize>,
}

/// Juxtaposes `[N, D_i]` feature blocks in argument order.
pub fn concat<T: Scalar>(parts: &[&Tensor<T>]) -> Result<(Tensor<T>, ConcatCache)> {
    let first = parts
        .first()
        .ok_or_else(|| shape_err!("concat: no parts"))?;
    let (n, _) = first.dims2()?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (pn, d) = p.dims2()?;
        if pn != n {
            return Err(shape_err!("concat: batch extent {pn} differs from {n}"));
        }
        widths.push(d);
    }
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(n * total);
    for row in 0..n {
        for (p, &d) in parts.iter().zip(&widths) {
            out.extend_from_slice(&p.data()[row * d..(row + 1) * d]);
        }
    }
    Ok((Tensor::from_vec(&[n, total], out)?, ConcatCache { widths }))
}

/// Splits the upstream gradient back into the recorded widths.
pub fn concat_backward<T: Scalar>(
    cache: ConcatCache,
    grad_output: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let (n, total) = grad_output.dims2()?;
    if total != cache.widths.iter().sum::<usize>() {
        return Err(shape_err!(
            "concat backward: width {total} does not match parts {:?}",
            cache.widths
        ));
    }
    let mut parts: Vec<Vec<T>> = cache
        .widths
        .iter()
        .map(|&d| Vec::with_capacity(n * d))
        .collect();
    for row in grad_output.data().chunks(total) {
        let mut start = 0;
        for (part, &d) in parts.iter_mut().zip(&cache.widths) {
            part.extend_from_slice(&row[start..start + d]);
            start += d;
        }
    }
    parts
        .into_iter()
        .zip(&cache.widths)
        .map(|(data, &d)| Tensor::from_vec(&[n, d], data))
        .collect()
}
