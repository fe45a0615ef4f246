//! Local phase quantization.
//!
//! For every pixel whose `M x M` neighbourhood fits the image, the local
//! Fourier transform is evaluated at `(a, 0)`, `(0, a)`, `(a, a)` and
//! `(a, -a)` with `a = 1 / M`. The signs of the four real and four imaginary
//! parts (bit set when `>= 0`) form an 8-bit code; the codes are histogrammed.
//!
//! The neighbourhood is centered on its own sum before filtering, using
//! integer gray levels scaled by `M^2`. At non-zero frequencies this leaves
//! the coefficients unchanged up to a positive factor, but it makes flat
//! regions produce exact zeros and makes the codes exactly invariant to a
//! constant gray-level offset.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::pipeline::GrayImage;

pub const LPQ_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpqConfig {
    /// Odd neighbourhood size `M >= 3`.
    pub window: usize,
    /// Decorrelate the coefficients before quantization.
    pub whiten: bool,
    /// Neighbouring-pixel correlation assumed by the whitening model.
    pub rho: f64,
}

impl Default for LpqConfig {
    fn default() -> Self {
        Self {
            window: 9,
            whiten: false,
            rho: 0.9,
        }
    }
}

impl LpqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "LPQ window must be odd and >= 3, got {}",
                self.window
            )));
        }
        Ok(())
    }

    pub fn frequency(&self) -> f64 {
        1.0 / self.window as f64
    }
}

#[derive(Clone, Copy, Default)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    fn mul(self, o: C64) -> C64 {
        C64 {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn conj(self) -> C64 {
        C64 {
            re: self.re,
            im: -self.im,
        }
    }
}

/// 8-bit code from the eight coefficients `[Re F1..F4, Im F1..F4]`.
fn code(coeffs: &[f64; 8]) -> u8 {
    coeffs
        .iter()
        .enumerate()
        .fold(0u8, |acc, (k, &v)| acc | (u8::from(v >= 0.0) << k))
}

/// Normalized 256-bin LPQ code histogram.
pub fn lpq_descriptor(image: &GrayImage, cfg: &LpqConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let m = cfg.window;
    let (w, h) = (image.width(), image.height());
    if w < m || h < m {
        return Err(shape_err!(
            "LPQ window {m} does not fit a {w}x{h} image"
        ));
    }
    let r = (m - 1) / 2;
    let levels: Vec<i64> = image.levels().into_iter().map(i64::from).collect();

    // integral image for exact window sums
    let mut integral = vec![0i64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0;
        for x in 0..w {
            row += levels[y * w + x];
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let window_sum = |x0: usize, y0: usize| -> i64 {
        integral[(y0 + m) * (w + 1) + x0 + m] - integral[y0 * (w + 1) + x0 + m]
            - integral[(y0 + m) * (w + 1) + x0]
            + integral[y0 * (w + 1) + x0]
    };

    let a = cfg.frequency();
    let basis: Vec<C64> = (0..m)
        .map(|k| {
            let x = k as f64 - r as f64;
            let t = -2.0 * PI * a * x;
            C64 {
                re: t.cos(),
                im: t.sin(),
            }
        })
        .collect();
    let whitening = cfg.whiten.then(|| whitening_transform(m, cfg.rho, &basis));

    let area = (m * m) as i64;
    let mut hist = vec![0u64; LPQ_BINS];
    let mut row0 = vec![0.0f64; m];
    let mut row1 = vec![C64::default(); m];
    for y0 in 0..=h - m {
        for x0 in 0..=w - m {
            let s = window_sum(x0, y0);
            for v in 0..m {
                let line = &levels[(y0 + v) * w + x0..(y0 + v) * w + x0 + m];
                let mut r0 = 0.0;
                let mut r1 = C64::default();
                for (&l, b) in line.iter().zip(&basis) {
                    let g = (area * l - s) as f64;
                    r0 += g;
                    r1.re += g * b.re;
                    r1.im += g * b.im;
                }
                row0[v] = r0;
                row1[v] = r1;
            }
            let mut f = [C64::default(); 4];
            for v in 0..m {
                let b = basis[v];
                f[0].re += row1[v].re;
                f[0].im += row1[v].im;
                f[1].re += row0[v] * b.re;
                f[1].im += row0[v] * b.im;
                let p = row1[v].mul(b);
                f[2].re += p.re;
                f[2].im += p.im;
                let q = row1[v].mul(b.conj());
                f[3].re += q.re;
                f[3].im += q.im;
            }
            let mut coeffs = [
                f[0].re, f[1].re, f[2].re, f[3].re, f[0].im, f[1].im, f[2].im, f[3].im,
            ];
            if let Some(v) = &whitening {
                let mut out = [0.0; 8];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..8).map(|j| v[j][i] * coeffs[j]).sum();
                }
                coeffs = out;
            }
            hist[code(&coeffs) as usize] += 1;
        }
    }
    let total: u64 = hist.iter().sum();
    Ok(hist.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// Eigenvectors (columns) of the coefficient covariance under a first-order
/// Markov pixel model with correlation `rho`.
fn whitening_transform(m: usize, rho: f64, basis: &[C64]) -> [[f64; 8]; 8] {
    let r = (m - 1) as f64 / 2.0;
    let positions: Vec<(f64, f64)> = (0..m * m)
        .map(|i| ((i % m) as f64 - r, (i / m) as f64 - r))
        .collect();
    // rows of the real 8 x N transform, matching the order used in
    // `lpq_descriptor`
    let mut rows = vec![vec![0.0; m * m]; 8];
    for i in 0..m * m {
        let (bx, by) = (basis[i % m], basis[i / m]);
        let filters = [bx, by, bx.mul(by), bx.mul(by.conj())];
        for (k, f) in filters.iter().enumerate() {
            rows[k][i] = f.re;
            rows[k + 4][i] = f.im;
        }
    }
    let mut cov = vec![vec![0.0; m * m]; m * m];
    for i in 0..m * m {
        for j in 0..m * m {
            let d = ((positions[i].0 - positions[j].0).powi(2)
                + (positions[i].1 - positions[j].1).powi(2))
            .sqrt();
            cov[i][j] = rho.powf(d);
        }
    }
    let mut d = [[0.0; 8]; 8];
    for a in 0..8 {
        let tmp: Vec<f64> = (0..m * m)
            .map(|j| (0..m * m).map(|i| rows[a][i] * cov[i][j]).sum())
            .collect();
        for b in 0..8 {
            d[a][b] = tmp.iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
        }
    }
    jacobi_eigenvectors(d)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 8x8 matrix; returns the
/// eigenvectors as columns.
fn jacobi_eigenvectors(mut a: [[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let mut v = [[0.0; 8]; 8];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..8)
            .flat_map(|i| (0..8).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..8 {
            for q in p + 1..8 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..8 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..8 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    v
}
