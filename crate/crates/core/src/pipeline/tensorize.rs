use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::image::GrayImage;

/// Global intensity standardization fitted on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub const IDENTITY: Self = Self {
        mean: 0.0,
        std: 1.0,
    };

    pub fn fit<'a>(images: impl IntoIterator<Item = &'a GrayImage>) -> Result<Self> {
        let (mut n, mut sum, mut sq) = (0usize, 0.0f64, 0.0f64);
        for img in images {
            for &v in img.data() {
                let v = f64::from(v);
                n += 1;
                sum += v;
                sq += v * v;
            }
        }
        if n == 0 {
            return Err(Error::Dataset("cannot fit standardizer on no samples".into()));
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        let std = if var > 1e-12 { var.sqrt() } else { 1.0 };
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Stacks equally sized images into `[N, 1, H, W]`, optionally standardized.
pub fn to_tensor<T: Scalar>(
    images: &[GrayImage],
    standardizer: Option<&Standardizer>,
) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| shape_err!("to_tensor: empty batch"))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        if (img.width(), img.height()) != (w, h) {
            return Err(shape_err!(
                "to_tensor: mixed extents {}x{} and {w}x{h}",
                img.width(),
                img.height()
            ));
        }
        match standardizer {
            Some(s) => data.extend(
                img.data()
                    .iter()
                    .map(|&v| T::from_f64_lossy(s.apply(f64::from(v)))),
            ),
            None => data.extend(img.data().iter().map(|&v| T::from_f64_lossy(f64::from(v)))),
        }
    }
    Tensor::from_vec(&[images.len(), 1, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_scaling() {
        let img = GrayImage::from_u8(2, 1, &[0, 255]).unwrap();
        let t: Tensor<f32> = to_tensor(&[img], None).unwrap();
        assert_eq!(t.data(), [0.0, 1.0]);
    }

    #[test]
    fn batch_shape() {
        let patches = vec![GrayImage::filled(224, 224, 0.3); 15];
        let t: Tensor<f32> = to_tensor(&patches, None).unwrap();
        assert_eq!(t.shape(), [15, 1, 224, 224]);
    }

    #[test]
    fn mixed_extents_rejected() {
        let patches = vec![GrayImage::filled(4, 4, 0.0), GrayImage::filled(4, 5, 0.0)];
        assert!(to_tensor::<f32>(&patches, None).is_err());
    }

    #[test]
    fn standardization_round_trip() {
        let imgs = vec![
            GrayImage::from_fn(8, 8, |x, y| (x + y) as f32 / 14.0),
            GrayImage::from_fn(8, 8, |x, _| x as f32 / 7.0),
        ];
        let s = Standardizer::fit(&imgs).unwrap();
        let t: Tensor<f64> = to_tensor(&imgs, Some(&s)).unwrap();
        let mean: f64 = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 1e-9);
        for (img, chunk) in imgs.iter().zip(t.data().chunks(64)) {
            for (&v, &z) in img.data().iter().zip(chunk) {
                assert!((s.invert(z) - f64::from(v)).abs() < 1e-6);
            }
        }
    }
}
