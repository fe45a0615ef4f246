use crate::error::{shape_err, Error, Result};

use super::image::GrayImage;

/// Square windows cut from an unfolded strip, left to right.
#[derive(Debug, Clone)]
pub struct PatchSet {
    pub window: usize,
    pub stride: usize,
    pub patches: Vec<GrayImage>,
    /// Column offset of each patch in the source strip.
    pub offsets: Vec<usize>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Horizontal step between consecutive windows.
pub fn patch_stride(window: usize, overlap: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    let stride = (window as f64 * (1.0 - overlap)).round() as usize;
    if stride == 0 {
        return Err(Error::Config(format!(
            "window {window} with overlap {overlap} gives a zero stride"
        )));
    }
    Ok(stride)
}

/// Number of full windows that fit a strip of width `width`.
pub fn patch_count(width: usize, window: usize, stride: usize) -> usize {
    if width < window {
        0
    } else {
        (width - window) / stride + 1
    }
}

/// Slides a `window x window` square along a strip whose height equals the
/// window. Columns after the last full window are dropped.
pub fn slice_patches(image: &GrayImage, window: usize, overlap: f64) -> Result<PatchSet> {
    if window == 0 || image.height() != window || image.width() < window {
        return Err(shape_err!(
            "cannot slice {window}x{window} windows from a {}x{} strip",
            image.width(),
            image.height()
        ));
    }
    let stride = patch_stride(window, overlap)?;
    let offsets: Vec<usize> = (0..patch_count(image.width(), window, stride))
        .map(|k| k * stride)
        .collect();
    let patches = offsets
        .iter()
        .map(|&x| image.crop(x, 0, window, window))
        .collect::<Result<_>>()?;
    Ok(PatchSet {
        window,
        stride,
        patches,
        offsets,
    })
}
