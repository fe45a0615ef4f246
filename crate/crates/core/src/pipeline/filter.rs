use super::image::GrayImage;

/// Normalized 1-D Gaussian taps covering ±3σ.
fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with border replication. `sigma <= 0` returns a
/// copy of the input.
pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let taps = gaussian_taps(sigma);
    let radius = (taps.len() / 2) as isize;
    let (w, h) = (image.width(), image.height());
    let horizontal = GrayImage::from_fn(w, h, |x, y| {
        let acc: f64 = taps
            .iter()
            .enumerate()
            .map(|(k, t)| t * f64::from(image.get_clamped(x as isize + k as isize - radius, y as isize)))
            .sum();
        acc as f32
    });
    GrayImage::from_fn(w, h, |x, y| {
        let acc: f64 = taps
            .iter()
            .enumerate()
            .map(|(k, t)| {
                t * f64::from(horizontal.get_clamped(x as isize, y as isize + k as isize - radius))
            })
            .sum();
        acc as f32
    })
}
