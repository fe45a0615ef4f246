//! Handcrafted texture descriptors (LPQ, GLCM/Haralick) and a linear
//! classifier used as the comparison baseline.

mod features;
mod glcm;
mod haralick;
mod linear;
mod lpq;

pub use features::{
    extract_features, feature_names, read_features_csv, write_features_csv, Descriptor,
    FeatureVector, FEATURE_LEN,
};
pub use glcm::{displacement, glcm, glcm_for_offset, quantize, Glcm, GlcmConfig};
pub use haralick::{haralick_features, HARALICK_LEN, HARALICK_NAMES};
pub use linear::{predict_linear, train_linear, LinearConfig, LinearModel};
pub use lpq::{lpq_descriptor, LpqConfig, LPQ_BINS};
