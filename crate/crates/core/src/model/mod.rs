//! The texture CNN: architecture, training step, weights I/O and activation
//! export.

mod activations;
mod arch;
mod network;
mod weights;

pub use activations::{export_activations, LayerSelector};
pub use arch::{ArchConfig, BranchPooling, Geometry, LayerParams};
pub use network::{argmax_rows, ActivationBundle, BatchGradients, Model};
pub use weights::{
    decode_weights, encode_weights, load_weights, save_weights, FORMAT_VERSION, MAGIC,
};
