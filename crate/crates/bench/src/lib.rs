//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcnn_core::pipeline::GrayImage;
use tcnn_core::{Scalar, Tensor};

/// Uniform noise image in `[0, 1)`.
pub fn noise_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| rng.random()).collect();
    GrayImage::new(width, height, data).expect("extents match data")
}

/// Tensor with entries uniform in `[-1, 1)`.
pub fn noise_tensor<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| T::from_f64_lossy(rng.random_range(-1.0..1.0)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}
