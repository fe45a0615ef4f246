use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::image::GrayImage;

/// Unfolding settings as they appear in configuration files. Unset fields
/// resolve against the image: the center defaults to the image center,
/// `r_max` to the largest inscribed radius and `r_min` to
/// `r_min_ratio * r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnfoldConfig {
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_min_ratio: f64,
    pub radial_samples: usize,
    pub angular_samples: usize,
}

impl Default for UnfoldConfig {
    fn default() -> Self {
        Self {
            center_x: None,
            center_y: None,
            r_min: None,
            r_max: None,
            r_min_ratio: 0.1,
            radial_samples: 94,
            angular_samples: 768,
        }
    }
}

/// Fully resolved sampling geometry in pixel-center coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnfoldGeometry {
    pub cx: f64,
    pub cy: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub radial_samples: usize,
    pub angular_samples: usize,
}

fn inscribed_radius(cx: f64, cy: f64, width: usize, height: usize) -> f64 {
    let right = width as f64 - 1.0 - cx;
    let bottom = height as f64 - 1.0 - cy;
    cx.min(cy).min(right).min(bottom)
}

impl UnfoldConfig {
    pub fn resolve(&self, width: usize, height: usize) -> UnfoldGeometry {
        let cx = self.center_x.unwrap_or((width as f64 - 1.0) / 2.0);
        let cy = self.center_y.unwrap_or((height as f64 - 1.0) / 2.0);
        let r_max = self
            .r_max
            .unwrap_or_else(|| inscribed_radius(cx, cy, width, height));
        let r_min = self.r_min.unwrap_or(self.r_min_ratio * r_max);
        UnfoldGeometry {
            cx,
            cy,
            r_min,
            r_max,
            radial_samples: self.radial_samples,
            angular_samples: self.angular_samples,
        }
    }
}

impl UnfoldGeometry {
    /// Default geometry for an image of the given size.
    pub fn centered(width: usize, height: usize) -> Self {
        UnfoldConfig::default().resolve(width, height)
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !(self.r_min > 0.0) {
            return Err(Error::Config(format!(
                "log-polar r_min must be positive, got {}",
                self.r_min
            )));
        }
        if !(self.r_max > self.r_min) {
            return Err(Error::Config(format!(
                "log-polar r_max ({}) must exceed r_min ({})",
                self.r_max, self.r_min
            )));
        }
        if self.radial_samples < 2 || self.angular_samples == 0 {
            return Err(Error::Config(
                "log-polar needs at least 2 radial and 1 angular sample".into(),
            ));
        }
        let inside = (0.0..=width as f64 - 1.0).contains(&self.cx)
            && (0.0..=height as f64 - 1.0).contains(&self.cy);
        if !inside {
            return Err(Error::Config(format!(
                "log-polar center ({}, {}) lies outside the {width}x{height} image",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Radius of output row `i`: geometric progression from `r_min` to `r_max`.
    pub fn radius(&self, i: usize) -> f64 {
        let t = i as f64 / (self.radial_samples - 1) as f64;
        self.r_min * (self.r_max / self.r_min).powf(t)
    }

    /// Angle of output column `j`.
    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.angular_samples as f64
    }
}

/// Resamples a bore image onto (log-radius, angle) axes: rows follow the
/// radius, columns the angle. Samples falling outside the image replicate the
/// border.
pub fn unfold_log_polar(image: &GrayImage, geom: &UnfoldGeometry) -> Result<GrayImage> {
    geom.validate(image.width(), image.height())?;
    let limit = inscribed_radius(geom.cx, geom.cy, image.width(), image.height());
    if geom.r_max > limit + 1e-9 {
        log::warn!(
            "log-polar r_max {:.1} exceeds inscribed radius {:.1}; border samples are clamped",
            geom.r_max,
            limit
        );
    }
    let trig: Vec<(f64, f64)> = (0..geom.angular_samples)
        .map(|j| {
            let t = geom.angle(j);
            (t.cos(), t.sin())
        })
        .collect();
    let mut data = Vec::with_capacity(geom.radial_samples * geom.angular_samples);
    for i in 0..geom.radial_samples {
        let r = geom.radius(i);
        for &(c, s) in &trig {
            data.push(image.sample_bilinear(geom.cx + r * c, geom.cy + r * s));
        }
    }
    GrayImage::new(geom.angular_samples, geom.radial_samples, data)
}
