//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Features are standardized with training-set statistics. The step size
//! starts at `learning_rate` and is halved whenever a step would increase the
//! penalized loss, so the recorded loss history never increases.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weights (not the biases).
    pub l2: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `[features, classes]`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Penalized training loss after each epoch (index 0 is the initial loss).
    pub history: Vec<f64>,
}

impl LinearModel {
    fn standardize(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.mean.len();
        let mut x = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(shape_err!("feature length {} (expected {d})", r.len()));
            }
            x.extend(
                r.iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((v, m), s)| (v - m) / s),
            );
        }
        Ok(x)
    }

    fn logits(&self, x: &[f64], n: usize) -> Vec<f64> {
        let d = self.mean.len();
        let k = self.classes;
        let mut z: Vec<f64> = (0..n).flat_map(|_| self.bias.iter().copied()).collect();
        f64::gemm(
            n,
            d,
            k,
            1.0,
            x,
            (d as isize, 1),
            &self.weights,
            (k as isize, 1),
            1.0,
            &mut z,
        );
        z
    }

    /// Class scores `[n, classes]`.
    pub fn scores(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let x = self.standardize(rows)?;
        Ok(self.logits(&x, rows.len()))
    }
}

/// Mean cross-entropy plus penalty, and its gradient.
fn objective(
    model: &LinearModel,
    x: &[f64],
    labels: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = labels.len();
    let d = model.mean.len();
    let k = model.classes;
    let z = model.logits(x, n);
    let mut loss = 0.0;
    let mut dz = vec![0.0; n * k];
    for (i, &y) in labels.iter().enumerate() {
        let row = &z[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        loss += sum.ln() + max - row[y];
        for c in 0..k {
            let p = (row[c] - max).exp() / sum;
            dz[i * k + c] = (p - f64::from(u8::from(c == y))) / n as f64;
        }
    }
    loss /= n as f64;
    loss += 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();

    let mut gw: Vec<f64> = model.weights.iter().map(|w| l2 * w).collect();
    f64::gemm(
        d,
        n,
        k,
        1.0,
        x,
        (1, d as isize),
        &dz,
        (k as isize, 1),
        1.0,
        &mut gw,
    );
    let mut gb = vec![0.0; k];
    for row in dz.chunks(k) {
        for (g, v) in gb.iter_mut().zip(row) {
            *g += v;
        }
    }
    (loss, gw, gb)
}

pub fn train_linear(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    cfg: &LinearConfig,
) -> Result<LinearModel> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(shape_err!(
            "{} feature rows for {} labels",
            features.len(),
            labels.len()
        ));
    }
    if classes < 2 {
        return Err(Error::Dataset("linear classifier needs at least 2 classes".into()));
    }
    let mut seen = vec![false; classes];
    for &l in labels {
        *seen
            .get_mut(l)
            .ok_or(Error::TargetOutOfRange { index: l, classes })? = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::Dataset(
            "training set contains a single class".into(),
        ));
    }
    let d = features[0].len();
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for r in features {
        if r.len() != d {
            return Err(shape_err!("feature rows have different lengths"));
        }
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; d];
    for r in features {
        for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    let std = std
        .into_iter()
        .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
        .collect();

    let mut model = LinearModel {
        classes,
        mean,
        std,
        weights: vec![0.0; d * classes],
        bias: vec![0.0; classes],
        history: Vec::with_capacity(cfg.epochs + 1),
    };
    let x = model.standardize(features)?;
    let (mut loss, mut gw, mut gb) = objective(&model, &x, labels, cfg.l2);
    model.history.push(loss);
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = model.clone();
            for (w, g) in trial.weights.iter_mut().zip(&gw) {
                *w -= lr * g;
            }
            for (b, g) in trial.bias.iter_mut().zip(&gb) {
                *b -= lr * g;
            }
            let (trial_loss, tgw, tgb) = objective(&trial, &x, labels, cfg.l2);
            if trial_loss <= loss {
                model.weights = trial.weights;
                model.bias = trial.bias;
                loss = trial_loss;
                gw = tgw;
                gb = tgb;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        model.history.push(loss);
        if !accepted {
            break;
        }
    }
    Ok(model)
}

/// Argmax of the class scores; ties go to the lowest class index.
pub fn predict_linear(model: &LinearModel, features: &[Vec<f64>]) -> Result<Vec<usize>> {
    let scores = model.scores(features)?;
    Ok(scores
        .chunks(model.classes)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 10.0;
            x.push(vec![1.0 + t, 0.5 * t]);
            y.push(0);
            x.push(vec![-1.0 - t, 0.3 * t]);
            y.push(1);
        }
        (x, y)
    }

    #[test]
    fn separable_set_fits_perfectly() {
        let (x, y) = toy();
        let m = train_linear(&x, &y, 2, &LinearConfig::default()).unwrap();
        assert_eq!(predict_linear(&m, &x).unwrap(), y);
    }

    #[test]
    fn history_never_increases() {
        let (x, y) = toy();
        let cfg = LinearConfig {
            learning_rate: 50.0,
            ..LinearConfig::default()
        };
        let m = train_linear(&x, &y, 2, &cfg).unwrap();
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.history.last().unwrap() < &m.history[0]);
    }

    #[test]
    fn untrained_model_predicts_lowest_class() {
        let (x, y) = toy();
        let cfg = LinearConfig {
            epochs: 0,
            ..LinearConfig::default()
        };
        let m = train_linear(&x, &y, 3, &cfg).unwrap();
        let scores = m.scores(&x).unwrap();
        assert!(scores.iter().all(|&s| s == 0.0));
        assert!(predict_linear(&m, &x).unwrap().iter().all(|&p| p == 0));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train_linear(&x, &[1, 1], 3, &LinearConfig::default()).is_err());
        assert!(train_linear(&x, &[0, 5], 3, &LinearConfig::default()).is_err());
    }
}
