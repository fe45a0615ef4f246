//! The thirteen Haralick statistics of a co-occurrence matrix. Entropies use
//! base-2 logarithms with `0 log 0 = 0`.

use super::glcm::Glcm;

pub const HARALICK_LEN: usize = 13;

pub const HARALICK_NAMES: [&str; HARALICK_LEN] = [
    "angular_second_moment",
    "contrast",
    "correlation",
    "sum_of_squares_variance",
    "inverse_difference_moment",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "info_measure_correlation_1",
    "info_measure_correlation_2",
];

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

fn entropy(dist: &[f64]) -> f64 {
    -dist.iter().map(|&p| plogp(p)).sum::<f64>()
}

/// Features in the order of [`HARALICK_NAMES`]. Correlation of a matrix with
/// zero marginal variance is reported as 1.
pub fn haralick_features(glcm: &Glcm) -> [f64; HARALICK_LEN] {
    let n = glcm.levels();
    let p = |i: usize, j: usize| glcm.get(i, j);

    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let v = p(i, j);
            px[i] += v;
            py[j] += v;
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
        }
    }
    let mean = |d: &[f64]| d.iter().enumerate().map(|(k, &v)| k as f64 * v).sum::<f64>();
    let var = |d: &[f64], mu: f64| {
        d.iter()
            .enumerate()
            .map(|(k, &v)| (k as f64 - mu).powi(2) * v)
            .sum::<f64>()
    };
    let (mu_x, mu_y) = (mean(&px), mean(&py));
    let (sd_x, sd_y) = (var(&px, mu_x).sqrt(), var(&py, mu_y).sqrt());

    let mut asm = 0.0;
    let mut cross = 0.0;
    let mut sum_sq_var = 0.0;
    let mut idm = 0.0;
    let mut hxy = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = p(i, j);
            asm += v * v;
            cross += (i * j) as f64 * v;
            sum_sq_var += (i as f64 - mu_x).powi(2) * v;
            idm += v / (1.0 + (i as f64 - j as f64).powi(2));
            hxy -= plogp(v);
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= v * q.log2();
                hxy2 -= q * q.log2();
            }
        }
    }

    let contrast = p_diff
        .iter()
        .enumerate()
        .map(|(k, &v)| (k * k) as f64 * v)
        .sum::<f64>();
    let correlation = if sd_x * sd_y > 1e-15 {
        ((cross - mu_x * mu_y) / (sd_x * sd_y)).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    let sum_average = mean(&p_sum);
    let sum_variance = var(&p_sum, sum_average);
    let sum_entropy = entropy(&p_sum);
    let difference_variance = var(&p_diff, mean(&p_diff));
    let difference_entropy = entropy(&p_diff);
    let (hx, hy) = (entropy(&px), entropy(&py));
    let imc1 = if hx.max(hy) > 0.0 {
        (hxy - hxy1) / hx.max(hy)
    } else {
        0.0
    };
    // exp(-2 (HXY2 - HXY)) with entropies in bits
    let imc2 = (1.0 - (-2.0 * (hxy2 - hxy)).exp2()).max(0.0).sqrt();

    [
        asm,
        contrast,
        correlation,
        sum_sq_var,
        idm,
        sum_average,
        sum_variance,
        sum_entropy,
        hxy,
        difference_variance,
        difference_entropy,
        imc1,
        imc2,
    ]
}
