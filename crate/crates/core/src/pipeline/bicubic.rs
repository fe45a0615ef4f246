//! Cubic-convolution resampling (Keys kernel, `a = -0.5`).

use crate::error::{shape_err, Result};

use super::image::GrayImage;

const A: f64 = -0.5;

fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four taps for one output coordinate: the anchor index (nearest tap at or
/// below the source position) plus clamped indices and weights.
struct Taps {
    anchor: usize,
    index: [usize; 4],
    weight: [f32; 4],
}

fn taps(out_len: usize, in_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let last = in_len as isize - 1;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let mut index = [0; 4];
            let mut weight = [0.0; 4];
            for k in 0..4 {
                index[k] = (base - 1 + k as isize).clamp(0, last) as usize;
                weight[k] = cubic(t + 1.0 - k as f64) as f32;
            }
            Taps {
                anchor: base.clamp(0, last) as usize,
                index,
                weight,
            }
        })
        .collect()
}

/// Weighted sum written as `p[anchor] + sum(w * (p - p[anchor]))`; identical
/// to `sum(w * p)` because the weights sum to one, and exact for constants.
#[inline]
fn apply(t: &Taps, sample: impl Fn(usize) -> f32) -> f32 {
    let anchor = sample(t.anchor);
    let mut acc = 0.0;
    for k in 0..4 {
        acc += t.weight[k] * (sample(t.index[k]) - anchor);
    }
    anchor + acc
}

/// Separable bicubic resize to `out_width x out_height`. Taps outside the
/// source replicate the border; results are clamped to `[0, 1]`.
pub fn resize_bicubic(image: &GrayImage, out_width: usize, out_height: usize) -> Result<GrayImage> {
    if out_width == 0 || out_height == 0 {
        return Err(shape_err!("bicubic target extents must be positive"));
    }
    let (w, h) = (image.width(), image.height());
    let tx = taps(out_width, w);
    let ty = taps(out_height, h);
    let src = image.data();

    let mut rows = vec![0.0f32; h * out_width];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        let out = &mut rows[y * out_width..(y + 1) * out_width];
        for (o, t) in out.iter_mut().zip(&tx) {
            *o = apply(t, |i| line[i]);
        }
    }
    let mut data = vec![0.0f32; out_width * out_height];
    for (oy, t) in ty.iter().enumerate() {
        let out = &mut data[oy * out_width..(oy + 1) * out_width];
        for (x, o) in out.iter_mut().enumerate() {
            *o = apply(t, |i| rows[i * out_width + x]).clamp(0.0, 1.0);
        }
    }
    GrayImage::new(out_width, out_height, data)
}

/// Upscales a square patch to `target x target`.
pub fn upscale_bicubic(patch: &GrayImage, target: usize) -> Result<GrayImage> {
    if target < patch.width() || target < patch.height() {
        return Err(shape_err!(
            "upscale target {target} is smaller than the {}x{} patch",
            patch.width(),
            patch.height()
        ));
    }
    resize_bicubic(patch, target, target)
}
