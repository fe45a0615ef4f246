use crate::error::{shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::conv::conv_output_extent;

pub struct MaxPoolCache {
    /// Flat input offset of the winning element for every output cell.
    argmax: Vec<usize>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

/// Max pooling over square windows. Ties resolve to the first position in
/// row-major scan order.
pub fn maxpool2d<T: Scalar>(
    input: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, MaxPoolCache)> {
    let (n, c, h, w) = input.dims4()?;
    if window == 0 || stride == 0 {
        return Err(Error::Config(
            "maxpool2d: window and stride must be positive".into(),
        ));
    }
    let (oh, ow) = match (
        conv_output_extent(h, window, stride),
        conv_output_extent(w, window, stride),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(shape_err!(
                "maxpool2d: window {window} exceeds input {h}x{w}"
            ))
        }
    };
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + i * stride * w + j * stride;
                for u in 0..window {
                    for v in 0..window {
                        let idx = base + (i * stride + u) * w + j * stride + v;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    let output_shape = vec![n, c, oh, ow];
    Ok((
        Tensor::from_vec(&output_shape, out)?,
        MaxPoolCache {
            argmax,
            input_shape: input.shape().to_vec(),
            output_shape,
        },
    ))
}

/// Routes each upstream value to its window's argmax.
pub fn maxpool2d_backward<T: Scalar>(
    cache: MaxPoolCache,
    grad_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_output.shape() != cache.output_shape.as_slice() {
        return Err(shape_err!(
            "maxpool backward: gradient {:?}, expected {:?}",
            grad_output.shape(),
            cache.output_shape
        ));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(grad_output.data()) {
        d[idx] = d[idx] + g;
    }
    Ok(dx)
}

pub struct EnergyCache<T> {
    input: Tensor<T>,
}

/// Energy pooling: the spatial mean of the rectified feature map, one value
/// per channel. `[N, C, H, W] -> [N, C]`.
pub fn energy_pool<T: Scalar>(fmaps: &Tensor<T>) -> Result<(Tensor<T>, EnergyCache<T>)> {
    let (n, c, h, w) = fmaps.dims4()?;
    let area = T::from_usize(h * w).expect("area fits");
    let out = fmaps
        .data()
        .chunks(h * w)
        .map(|plane| {
            plane
                .iter()
                .map(|&x| if x > T::zero() { x } else { T::zero() })
                .sum::<T>()
                / area
        })
        .collect();
    Ok((
        Tensor::from_vec(&[n, c], out)?,
        EnergyCache {
            input: fmaps.clone(),
        },
    ))
}

/// Spreads `g / (H*W)` over strictly positive input positions.
pub fn energy_pool_backward<T: Scalar>(
    cache: EnergyCache<T>,
    grad_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = cache.input.dims4()?;
    if grad_output.shape() != [n, c] {
        return Err(shape_err!(
            "energy backward: gradient {:?}, expected [{n}, {c}]",
            grad_output.shape()
        ));
    }
    let area = T::from_usize(h * w).expect("area fits");
    let mut dx = cache.input;
    for (plane, &g) in dx.data_mut().chunks_mut(h * w).zip(grad_output.data()) {
        let share = g / area;
        for x in plane {
            *x = if *x > T::zero() { share } else { T::zero() };
        }
    }
    Ok(dx)
}

pub struct GlobalMaxCache {
    argmax: Vec<usize>,
    input_shape: Vec<usize>,
}

/// Global max over each feature map. `[N, C, H, W] -> [N, C]`.
pub fn global_max_pool<T: Scalar>(fmaps: &Tensor<T>) -> Result<(Tensor<T>, GlobalMaxCache)> {
    let (n, c, h, w) = fmaps.dims4()?;
    let mut out = Vec::with_capacity(n * c);
    let mut argmax = Vec::with_capacity(n * c);
    for (p, plane) in fmaps.data().chunks(h * w).enumerate() {
        let mut best = 0;
        for (i, &x) in plane.iter().enumerate() {
            if x > plane[best] {
                best = i;
            }
        }
        out.push(plane[best]);
        argmax.push(p * h * w + best);
    }
    Ok((
        Tensor::from_vec(&[n, c], out)?,
        GlobalMaxCache {
            argmax,
            input_shape: fmaps.shape().to_vec(),
        },
    ))
}

pub fn global_max_pool_backward<T: Scalar>(
    cache: GlobalMaxCache,
    grad_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_output.len() != cache.argmax.len() {
        return Err(shape_err!(
            "global max backward: gradient {:?} does not match {} maps",
            grad_output.shape(),
            cache.argmax.len()
        ));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    for (&idx, &g) in cache.argmax.iter().zip(grad_output.data()) {
        dx.data_mut()[idx] = g;
    }
    Ok(dx)
}
