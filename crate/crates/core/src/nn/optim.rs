//! Parameter update rules.
//!
//! SGD with momentum:
//!   `v <- mu * v - lr * g`, `p <- p + v`
//!
//! Adam:
//!   `m <- b1 * m + (1 - b1) * g`, `s <- b2 * s + (1 - b2) * g^2`,
//!   `p <- p - lr * (m / (1 - b1^t)) / (sqrt(s / (1 - b2^t)) + eps)`
//! where `t` is the step counter after incrementing.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// SGD only.
    pub momentum: f64,
    /// Adam only.
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            momentum,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.momentum)
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Moment accumulators mirroring the parameter list.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Refuses the whole step, leaving parameters and
    /// state untouched, if any gradient is non-finite.
    pub fn step(
        &mut self,
        config: &OptimizerConfig,
        params: &mut [Tensor<T>],
        grads: &[Tensor<T>],
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(shape_err!(
                "optimizer: {} params, {} grads, {} accumulators",
                params.len(),
                grads.len(),
                self.first.len()
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(shape_err!(
                    "optimizer: parameter #{i} shape {:?}, gradient {:?}",
                    p.shape(),
                    g.shape()
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(format!("#{i}")));
            }
        }
        self.step += 1;
        let lr = T::from_f64_lossy(config.learning_rate);
        match config.kind {
            OptimizerKind::Sgd => {
                let mu = T::from_f64_lossy(config.momentum);
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((p, &g), v) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                        *v = mu * *v - lr * g;
                        *p = *p + *v;
                    }
                }
            }
            OptimizerKind::Adam => {
                let b1 = T::from_f64_lossy(config.beta1);
                let b2 = T::from_f64_lossy(config.beta2);
                let eps = T::from_f64_lossy(config.epsilon);
                let t = self.step as i32;
                let c1 = T::from_f64_lossy(1.0 - config.beta1.powi(t));
                let c2 = T::from_f64_lossy(1.0 - config.beta2.powi(t));
                for (((p, g), m), s) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((p, &g), m), s) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(s.data_mut())
                    {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *s = b2 * *s + (T::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let s_hat = *s / c2;
                        *p = *p - lr * m_hat / (s_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
