use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::conv_output_extent;

/// How the first convolution's rectified maps are reduced for the texture
/// path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchPooling {
    /// Spatial mean of rectified activations (energy).
    Energy,
    /// Global maximum.
    Max,
}

/// Architecture of the texture network. Defaults reproduce the published
/// 43,267-parameter model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub input_size: usize,
    pub input_channels: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv1_stride: usize,
    pub pool_window: usize,
    pub pool_stride: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub conv2_stride: usize,
    pub conv1_pooling: BranchPooling,
    pub dense1: usize,
    pub dense2: usize,
    pub classes: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            input_size: 224,
            input_channels: 1,
            conv1_filters: 32,
            conv1_kernel: 11,
            conv1_stride: 3,
            pool_window: 2,
            pool_stride: 2,
            conv2_filters: 64,
            conv2_kernel: 3,
            conv2_stride: 1,
            conv1_pooling: BranchPooling::Energy,
            dense1: 128,
            dense2: 64,
            classes: 3,
        }
    }
}

/// Spatial extents of the feature maps along the convolutional path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub conv1: usize,
    pub pool: usize,
    pub conv2: usize,
}

/// One row of the parameter table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub layer: &'static str,
    pub weight_shape: Vec<usize>,
    pub bias_len: usize,
}

impl LayerParams {
    pub fn count(&self) -> usize {
        self.weight_shape.iter().product::<usize>() + self.bias_len
    }
}

pub(crate) const PARAM_NAMES: [&str; 10] = [
    "conv1.kernels",
    "conv1.bias",
    "conv2.kernels",
    "conv2.bias",
    "dense1.weights",
    "dense1.bias",
    "dense2.weights",
    "dense2.bias",
    "output.weights",
    "output.bias",
];

impl ArchConfig {
    pub fn geometry(&self) -> Result<Geometry> {
        let positive = [
            self.input_size,
            self.input_channels,
            self.conv1_filters,
            self.conv2_filters,
            self.dense1,
            self.dense2,
            self.classes,
        ];
        if positive.contains(&0) {
            return Err(Error::Config(format!(
                "architecture extents must be positive: {self:?}"
            )));
        }
        let step = |input: usize, kernel: usize, stride: usize, what: &str| {
            conv_output_extent(input, kernel, stride).ok_or_else(|| {
                Error::Config(format!(
                    "{what}: window {kernel} / stride {stride} does not fit a {input}x{input} map"
                ))
            })
        };
        let conv1 = step(
            self.input_size,
            self.conv1_kernel,
            self.conv1_stride,
            "conv1",
        )?;
        let pool = step(conv1, self.pool_window, self.pool_stride, "pool")?;
        let conv2 = step(pool, self.conv2_kernel, self.conv2_stride, "conv2")?;
        Ok(Geometry { conv1, pool, conv2 })
    }

    /// Width of the concatenated texture vector feeding the dense head.
    pub fn texture_width(&self) -> usize {
        self.conv2_filters + self.conv1_filters
    }

    pub fn layer_table(&self) -> Vec<LayerParams> {
        vec![
            LayerParams {
                layer: "conv1",
                weight_shape: vec![
                    self.conv1_filters,
                    self.input_channels,
                    self.conv1_kernel,
                    self.conv1_kernel,
                ],
                bias_len: self.conv1_filters,
            },
            LayerParams {
                layer: "conv2",
                weight_shape: vec![
                    self.conv2_filters,
                    self.conv1_filters,
                    self.conv2_kernel,
                    self.conv2_kernel,
                ],
                bias_len: self.conv2_filters,
            },
            LayerParams {
                layer: "dense1",
                weight_shape: vec![self.texture_width(), self.dense1],
                bias_len: self.dense1,
            },
            LayerParams {
                layer: "dense2",
                weight_shape: vec![self.dense1, self.dense2],
                bias_len: self.dense2,
            },
            LayerParams {
                layer: "output",
                weight_shape: vec![self.dense2, self.classes],
                bias_len: self.classes,
            },
        ]
    }

    /// `(name, shape)` of every parameter record in storage order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let mut names = PARAM_NAMES.iter();
        self.layer_table()
            .into_iter()
            .flat_map(|l| [l.weight_shape, vec![l.bias_len]])
            .map(|shape| (*names.next().expect("ten records"), shape))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_table().iter().map(LayerParams::count).sum()
    }

    /// Parameters of the two convolution layers only.
    pub fn conv_param_count(&self) -> usize {
        self.layer_table()[..2].iter().map(LayerParams::count).sum()
    }
}
