//! Image preprocessing: log-polar unfolding, patch slicing, bicubic upscaling,
//! augmentation and tensor conversion.

mod augment;
mod bicubic;
mod filter;
mod image;
mod logpolar;
mod patches;
mod tensorize;

pub use augment::{augment, AugmentConfig, FillPolicy};
pub use bicubic::{resize_bicubic, upscale_bicubic};
pub use filter::gaussian_blur;
pub use image::GrayImage;
pub use logpolar::{unfold_log_polar, UnfoldConfig, UnfoldGeometry};
pub use patches::{patch_count, patch_stride, slice_patches, PatchSet};
pub use tensorize::{to_tensor, Standardizer};
