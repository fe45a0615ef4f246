use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Output extent of a valid (unpadded) convolution or pooling window.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || input < kernel {
        return None;
    }
    Some((input - kernel) / stride + 1)
}

/// Saved state of one `conv2d` call.
pub struct Conv2dCache<T> {
    /// Per-sample im2col matrices, each `(cin*kh*kw) x (oh*ow)`.
    cols: Vec<T>,
    kernels: Tensor<T>,
    input_dims: (usize, usize, usize, usize),
    out_hw: (usize, usize),
    stride: usize,
}

pub struct Conv2dGrads<T> {
    /// Absent when the caller did not request it (first layer).
    pub input: Option<Tensor<T>>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

fn im2col<T: Scalar>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    (kh, kw): (usize, usize),
    stride: usize,
    (oh, ow): (usize, usize),
    cols: &mut [T],
) {
    let hw = oh * ow;
    for ci in 0..c {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for u in 0..kh {
            for v in 0..kw {
                let row = (ci * kh + u) * kw + v;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                for i in 0..oh {
                    let src = &plane[(i * stride + u) * w + v..];
                    let dst_row = &mut dst[i * ow..(i + 1) * ow];
                    if stride == 1 {
                        dst_row.copy_from_slice(&src[..ow]);
                    } else {
                        for (j, d) in dst_row.iter_mut().enumerate() {
                            *d = src[j * stride];
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(
    cols: &[T],
    (c, h, w): (usize, usize, usize),
    (kh, kw): (usize, usize),
    stride: usize,
    (oh, ow): (usize, usize),
    out: &mut [T],
) {
    let hw = oh * ow;
    for ci in 0..c {
        let plane = &mut out[ci * h * w..(ci + 1) * h * w];
        for u in 0..kh {
            for v in 0..kw {
                let row = (ci * kh + u) * kw + v;
                let src = &cols[row * hw..(row + 1) * hw];
                for i in 0..oh {
                    let base = (i * stride + u) * w + v;
                    for j in 0..ow {
                        plane[base + j * stride] = plane[base + j * stride] + src[i * ow + j];
                    }
                }
            }
        }
    }
}

/// Valid 2-D convolution (cross-correlation) with a square or rectangular
/// kernel bank of shape `[cout, cin, kh, kw]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
) -> Result<(Tensor<T>, Conv2dCache<T>)> {
    let (n, cin, h, w) = input.dims4()?;
    let (cout, kcin, kh, kw) = kernels.dims4()?;
    if kcin != cin {
        return Err(shape_err!(
            "conv2d: input has {cin} channels, kernels expect {kcin}"
        ));
    }
    if bias.shape() != [cout] {
        return Err(shape_err!(
            "conv2d: bias shape {:?}, expected [{cout}]",
            bias.shape()
        ));
    }
    if stride == 0 {
        return Err(Error::Config("conv2d: stride must be positive".into()));
    }
    let (oh, ow) = match (
        conv_output_extent(h, kh, stride),
        conv_output_extent(w, kw, stride),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(shape_err!(
                "conv2d: kernel {kh}x{kw} does not fit input {h}x{w}"
            ))
        }
    };

    let ckk = cin * kh * kw;
    let hw = oh * ow;
    let mut cols = vec![T::zero(); n * ckk * hw];
    let mut out = vec![T::zero(); n * cout * hw];
    let sample_len = cin * h * w;

    out.par_chunks_mut(cout * hw)
        .zip(cols.par_chunks_mut(ckk * hw))
        .enumerate()
        .for_each(|(s, (out_s, cols_s))| {
            let x = &input.data()[s * sample_len..(s + 1) * sample_len];
            im2col(x, (cin, h, w), (kh, kw), stride, (oh, ow), cols_s);
            for (co, row) in out_s.chunks_mut(hw).enumerate() {
                row.fill(bias.data()[co]);
            }
            T::gemm(
                cout,
                ckk,
                hw,
                T::one(),
                kernels.data(),
                (ckk as isize, 1),
                cols_s,
                (hw as isize, 1),
                T::one(),
                out_s,
            );
        });

    let output = Tensor::from_vec(&[n, cout, oh, ow], out)?;
    let cache = Conv2dCache {
        cols,
        kernels: kernels.clone(),
        input_dims: (n, cin, h, w),
        out_hw: (oh, ow),
        stride,
    };
    Ok((output, cache))
}

/// Gradients of a `conv2d` call given the upstream gradient of its output.
///
/// Per-sample kernel gradients are reduced in sample order, so the result does
/// not depend on the number of worker threads.
pub fn conv2d_backward<T: Scalar>(
    cache: Conv2dCache<T>,
    grad_output: &Tensor<T>,
    need_input_grad: bool,
) -> Result<Conv2dGrads<T>> {
    let (n, cin, h, w) = cache.input_dims;
    let (cout, _, kh, kw) = cache.kernels.dims4()?;
    let (oh, ow) = cache.out_hw;
    if grad_output.shape() != [n, cout, oh, ow] {
        return Err(shape_err!(
            "conv2d backward: upstream gradient {:?}, expected {:?}",
            grad_output.shape(),
            [n, cout, oh, ow]
        ));
    }
    let ckk = cin * kh * kw;
    let hw = oh * ow;
    let stride = cache.stride;
    let kernels = &cache.kernels;
    let cols = &cache.cols;

    let per_sample: Vec<(Vec<T>, Option<Vec<T>>)> = (0..n)
        .into_par_iter()
        .map(|s| {
            let g = &grad_output.data()[s * cout * hw..(s + 1) * cout * hw];
            let cols_s = &cols[s * ckk * hw..(s + 1) * ckk * hw];
            let mut dk = vec![T::zero(); cout * ckk];
            // dK = G * cols^T
            T::gemm(
                cout,
                hw,
                ckk,
                T::one(),
                g,
                (hw as isize, 1),
                cols_s,
                (1, hw as isize),
                T::zero(),
                &mut dk,
            );
            let dx = need_input_grad.then(|| {
                let mut dcols = vec![T::zero(); ckk * hw];
                // dcols = K^T * G
                T::gemm(
                    ckk,
                    cout,
                    hw,
                    T::one(),
                    kernels.data(),
                    (1, ckk as isize),
                    g,
                    (hw as isize, 1),
                    T::zero(),
                    &mut dcols,
                );
                let mut dx = vec![T::zero(); cin * h * w];
                col2im(&dcols, (cin, h, w), (kh, kw), stride, (oh, ow), &mut dx);
                dx
            });
            (dk, dx)
        })
        .collect();

    let mut dk = vec![T::zero(); cout * ckk];
    let mut dx = need_input_grad.then(|| Vec::with_capacity(n * cin * h * w));
    for (dk_s, dx_s) in per_sample {
        for (acc, v) in dk.iter_mut().zip(dk_s) {
            *acc = *acc + v;
        }
        if let (Some(dx), Some(dx_s)) = (dx.as_mut(), dx_s) {
            dx.extend(dx_s);
        }
    }

    let mut db = vec![T::zero(); cout];
    for s in 0..n {
        for (co, acc) in db.iter_mut().enumerate() {
            let start = (s * cout + co) * hw;
            let sum: T = grad_output.data()[start..start + hw].iter().copied().sum();
            *acc = *acc + sum;
        }
    }

    Ok(Conv2dGrads {
        input: dx
            .map(|d| Tensor::from_vec(&[n, cin, h, w], d))
            .transpose()?,
        kernels: Tensor::from_vec(cache.kernels.shape(), dk)?,
        bias: Tensor::from_vec(&[cout], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct nested-loop convolution.
    fn naive_conv(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, s: usize) -> Tensor<f64> {
        let (n, cin, h, w) = x.dims4().unwrap();
        let (cout, _, kh, kw) = k.dims4().unwrap();
        let (oh, ow) = ((h - kh) / s + 1, (w - kw) / s + 1);
        let mut out = Tensor::zeros(&[n, cout, oh, ow]);
        for ni in 0..n {
            for co in 0..cout {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = b.at(&[co]);
                        for ci in 0..cin {
                            for u in 0..kh {
                                for v in 0..kw {
                                    acc += x.at(&[ni, ci, i * s + u, j * s + v])
                                        * k.at(&[co, ci, u, v]);
                                }
                            }
                        }
                        let off = out.offset(&[ni, co, i, j]);
                        out.data_mut()[off] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn first_layer_geometry() {
        let x = Tensor::<f32>::zeros(&[1, 1, 224, 224]);
        let k = Tensor::<f32>::zeros(&[32, 1, 11, 11]);
        let b = Tensor::<f32>::zeros(&[32]);
        let (y, _) = conv2d(&x, &k, &b, 3).unwrap();
        assert_eq!(y.shape(), [1, 32, 72, 72]);
    }

    #[test]
    fn second_layer_geometry() {
        let x = Tensor::<f32>::zeros(&[1, 32, 36, 36]);
        let k = Tensor::<f32>::zeros(&[64, 32, 3, 3]);
        let b = Tensor::<f32>::zeros(&[64]);
        let (y, _) = conv2d(&x, &k, &b, 1).unwrap();
        assert_eq!(y.shape(), [1, 64, 34, 34]);
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 1, 5, 7], &mut rng);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let (y, _) = conv2d(&x, &k, &b, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(&[1, 1, 4, 4], &mut rng);
        let k = random(&[1, 1, 2, 2], &mut rng);
        let b = Tensor::zeros(&[1]);
        let (y, _) = conv2d(&x, &k, &b, 1).unwrap();
        assert_eq!(y.shape(), [1, 1, 3, 3]);
        let expected = naive_conv(&x, &k, &b, 1);
        for (a, e) in y.data().iter().zip(expected.data()) {
            assert!((a - e).abs() < 1e-12);
        }

        let x = random(&[3, 2, 9, 8], &mut rng);
        let k = random(&[4, 2, 3, 2], &mut rng);
        let b = random(&[4], &mut rng);
        let (y, _) = conv2d(&x, &k, &b, 2).unwrap();
        let expected = naive_conv(&x, &k, &b, 2);
        assert_eq!(y.shape(), expected.shape());
        for (a, e) in y.data().iter().zip(expected.data()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_channel_mismatch_and_oversized_kernel() {
        let x = Tensor::<f32>::zeros(&[1, 2, 5, 5]);
        let b = Tensor::<f32>::zeros(&[1]);
        assert!(conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), &b, 1).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 6, 6]), &b, 1).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 3, 3]), &b, 0).is_err());
    }

    #[test]
    fn backward_shapes_mirror_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[2, 3, 8, 8], &mut rng);
        let k = random(&[5, 3, 3, 3], &mut rng);
        let b = random(&[5], &mut rng);
        let (y, cache) = conv2d(&x, &k, &b, 2).unwrap();
        let g = conv2d_backward(cache, &y, true).unwrap();
        assert_eq!(g.input.unwrap().shape(), x.shape());
        assert_eq!(g.kernels.shape(), k.shape());
        assert_eq!(g.bias.shape(), b.shape());
    }
}
