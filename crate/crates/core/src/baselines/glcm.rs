use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::pipeline::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlcmConfig {
    /// Number of gray levels after quantization.
    pub levels: usize,
    /// Pixel displacement.
    pub distance: usize,
    /// Displacement directions in degrees; the matrices are averaged.
    pub angles: Vec<f64>,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            distance: 1,
            angles: vec![0.0, 45.0, 90.0, 135.0],
        }
    }
}

impl GlcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 || self.distance < 1 || self.angles.is_empty() {
            return Err(Error::Config(format!("invalid GLCM settings {self:?}")));
        }
        Ok(())
    }
}

/// Normalized, symmetric co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    data: Vec<f64>,
}

impl Glcm {
    /// Wraps a matrix, checking that it is square, non-negative and sums to 1.
    pub fn from_matrix(levels: usize, data: Vec<f64>) -> Result<Self> {
        if levels == 0 || data.len() != levels * levels {
            return Err(shape_err!(
                "GLCM with {levels} levels needs {} entries",
                levels * levels
            ));
        }
        let sum: f64 = data.iter().sum();
        if data.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "GLCM must be non-negative and sum to 1 (sum {sum})"
            )));
        }
        Ok(Self { levels, data })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.levels + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Uniform quantization of the observed sample range into `levels` bins.
pub fn quantize(image: &GrayImage, levels: usize) -> Vec<usize> {
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = f64::from(hi - lo);
    image
        .data()
        .iter()
        .map(|&v| {
            if span <= 0.0 {
                0
            } else {
                ((f64::from(v - lo) / span * levels as f64) as usize).min(levels - 1)
            }
        })
        .collect()
}

/// `(dx, dy)` for an angle in degrees, with `y` pointing down so that 45
/// degrees points up and to the right.
pub fn displacement(angle_degrees: f64, distance: usize) -> (isize, isize) {
    let t = angle_degrees.to_radians();
    let d = distance as f64;
    ((d * t.cos()).round() as isize, -(d * t.sin()).round() as isize)
}

/// Symmetric normalized co-occurrence counts for one displacement.
pub fn glcm_for_offset(
    quantized: &[usize],
    width: usize,
    height: usize,
    levels: usize,
    (dx, dy): (isize, isize),
) -> Result<Glcm> {
    let mut counts = vec![0u64; levels * levels];
    for y in 0..height as isize {
        let y2 = y + dy;
        if y2 < 0 || y2 >= height as isize {
            continue;
        }
        for x in 0..width as isize {
            let x2 = x + dx;
            if x2 < 0 || x2 >= width as isize {
                continue;
            }
            let a = quantized[y as usize * width + x as usize];
            let b = quantized[y2 as usize * width + x2 as usize];
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(shape_err!(
            "no pixel pairs at offset ({dx}, {dy}) in a {width}x{height} image"
        ));
    }
    Glcm::from_matrix(
        levels,
        counts.iter().map(|&c| c as f64 / total as f64).collect(),
    )
}

/// Angle-averaged co-occurrence matrix of an image.
pub fn glcm(image: &GrayImage, cfg: &GlcmConfig) -> Result<Glcm> {
    cfg.validate()?;
    if image.width() <= cfg.distance && image.height() <= cfg.distance {
        return Err(shape_err!(
            "image {}x{} too small for distance {}",
            image.width(),
            image.height(),
            cfg.distance
        ));
    }
    let q = quantize(image, cfg.levels);
    let mut acc = vec![0.0; cfg.levels * cfg.levels];
    for &angle in &cfg.angles {
        let m = glcm_for_offset(
            &q,
            image.width(),
            image.height(),
            cfg.levels,
            displacement(angle, cfg.distance),
        )?;
        for (a, p) in acc.iter_mut().zip(m.data()) {
            *a += p;
        }
    }
    let n = cfg.angles.len() as f64;
    Glcm::from_matrix(cfg.levels, acc.into_iter().map(|v| v / n).collect())
}
