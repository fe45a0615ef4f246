use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::GrayImage;
use crate::tensor::{Scalar, Tensor};

use super::network::Model;

/// Which convolution stage to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelector {
    Conv1,
    Conv2,
}

impl FromStr for LayerSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv1" => Ok(Self::Conv1),
            "conv2" => Ok(Self::Conv2),
            other => Err(Error::UnknownLayer(other.to_string())),
        }
    }
}

/// Rectified feature maps of the first sample in `input`, each min-max
/// normalized to 8-bit. Maps with zero range come out mid-gray.
pub fn export_activations<T: Scalar>(
    model: &Model<T>,
    input: &Tensor<T>,
    layer: LayerSelector,
) -> Result<Vec<GrayImage>> {
    let (_, bundle) = model.forward(input, true)?;
    let bundle = bundle.expect("capture requested");
    let maps = match layer {
        LayerSelector::Conv1 => bundle.conv1,
        LayerSelector::Conv2 => bundle.conv2,
    };
    let (_, c, h, w) = maps.dims4()?;
    maps.sample(0)
        .chunks(h * w)
        .take(c)
        .map(|plane| {
            let lo = plane.iter().copied().fold(T::infinity(), T::min).as_f64();
            let hi = plane.iter().copied().fold(T::neg_infinity(), T::max).as_f64();
            let bytes: Vec<u8> = if hi > lo {
                plane
                    .iter()
                    .map(|&v| ((v.as_f64() - lo) / (hi - lo) * 255.0).round() as u8)
                    .collect()
            } else {
                vec![128; plane.len()]
            };
            GrayImage::from_u8(w, h, &bytes)
        })
        .collect()
}
