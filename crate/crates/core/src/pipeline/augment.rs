use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Replicate the nearest border sample.
    Nearest,
    /// Use `AugmentConfig::fill_value`.
    Constant,
}

/// Random flip, rotation and shift, applied in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub flip_probability: f64,
    /// Rotation angle drawn uniformly from `[-rotation_degrees, rotation_degrees]`.
    pub rotation_degrees: f64,
    /// Maximum horizontal shift as a fraction of the width.
    pub width_shift: f64,
    pub height_shift: f64,
    pub fill: FillPolicy,
    pub fill_value: f32,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            flip_probability: 0.5,
            rotation_degrees: 15.0,
            width_shift: 0.1,
            height_shift: 0.1,
            fill: FillPolicy::Nearest,
            fill_value: 0.0,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Configuration that leaves every image unchanged.
    pub fn identity() -> Self {
        Self {
            flip_probability: 0.0,
            rotation_degrees: 0.0,
            width_shift: 0.0,
            height_shift: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.flip_probability)
            && self.rotation_degrees >= 0.0
            && self.width_shift >= 0.0
            && self.height_shift >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid augmentation {self:?}")))
        }
    }
}

fn sample(img: &GrayImage, x: f64, y: f64, cfg: &AugmentConfig) -> f32 {
    if cfg.fill == FillPolicy::Constant {
        let (w, h) = (img.width() as f64, img.height() as f64);
        if x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5 {
            return cfg.fill_value;
        }
    }
    img.sample_bilinear(x, y)
}

/// Applies one random augmentation. Always consumes exactly four draws from
/// `rng`, so the stream stays aligned whatever the configuration.
pub fn augment<R: Rng + ?Sized>(patch: &GrayImage, cfg: &AugmentConfig, rng: &mut R) -> GrayImage {
    let flip_draw: f64 = rng.random();
    let angle_draw: f64 = rng.random();
    let dx_draw: f64 = rng.random();
    let dy_draw: f64 = rng.random();

    let (w, h) = (patch.width(), patch.height());
    let mut img = patch.clone();

    if flip_draw < cfg.flip_probability {
        img = GrayImage::from_fn(w, h, |x, y| patch.get(w - 1 - x, y));
    }

    let angle = (2.0 * angle_draw - 1.0) * cfg.rotation_degrees.to_radians();
    if angle != 0.0 {
        let (s, c) = angle.sin_cos();
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let src = img;
        img = GrayImage::from_fn(w, h, |x, y| {
            // inverse rotation of the output coordinate
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            sample(&src, cx + c * dx + s * dy, cy - s * dx + c * dy, cfg)
        });
    }

    let shift = |draw: f64, frac: f64, extent: usize| -> isize {
        let max = (frac * extent as f64).floor() as isize;
        ((draw * (2 * max + 1) as f64).floor() as isize - max).clamp(-max, max)
    };
    let dx = shift(dx_draw, cfg.width_shift, w);
    let dy = shift(dy_draw, cfg.height_shift, h);
    if dx != 0 || dy != 0 {
        let src = img;
        img = GrayImage::from_fn(w, h, |x, y| {
            let sx = x as isize - dx;
            let sy = y as isize - dy;
            let outside = sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize;
            if outside && cfg.fill == FillPolicy::Constant {
                cfg.fill_value
            } else {
                src.get_clamped(sx, sy)
            }
        });
    }
    img
}
