use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Floor on the denominator so that gradients that are both ~0 compare as
/// absolute differences.
const DENOMINATOR_FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}

/// Compares an analytic backward pass against central differences.
///
/// `point` packs every differentiable argument of the operation. `forward`
/// maps a point to the flattened outputs; `backward` maps a point and an
/// upstream gradient to the gradient with respect to the point. The scalar
/// objective is a random projection `sum(r * forward(x))`. Returns the maximum
/// relative error over all coordinates.
pub fn grad_check<F, B>(point: &[f64], epsilon: f64, seed: u64, forward: F, backward: B) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    B: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outputs = forward(point);
    let projection: Vec<f64> = outputs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let objective = |x: &[f64]| -> f64 {
        forward(x)
            .iter()
            .zip(&projection)
            .map(|(y, r)| y * r)
            .sum()
    };
    let analytic = backward(point, &projection);
    assert_eq!(analytic.len(), point.len(), "gradient length");

    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        probe[i] = point[i] + epsilon;
        let plus = objective(&probe);
        probe[i] = point[i] - epsilon;
        let minus = objective(&probe);
        probe[i] = point[i];
        let numeric = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
