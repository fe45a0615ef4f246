use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};
use crate::nn::{
    concat, concat_backward, conv2d, conv2d_backward, dense, dense_backward, energy_pool,
    energy_pool_backward, global_max_pool, global_max_pool_backward, maxpool2d,
    maxpool2d_backward, relu, relu_backward, softmax_xent, Conv2dCache, DenseCache, EnergyCache,
    GlobalMaxCache, MaxPoolCache, OptimizerConfig, OptimizerState, ReluCache,
};
use crate::tensor::{Scalar, Tensor};

use super::arch::{ArchConfig, BranchPooling, Geometry, PARAM_NAMES};

const CONV1_K: usize = 0;
const CONV1_B: usize = 1;
const CONV2_K: usize = 2;
const CONV2_B: usize = 3;
const DENSE1_W: usize = 4;
const DENSE1_B: usize = 5;
const DENSE2_W: usize = 6;
const DENSE2_B: usize = 7;
const OUT_W: usize = 8;
const OUT_B: usize = 9;

/// Feature maps captured during one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationBundle<T> {
    /// Rectified first-convolution maps, `[N, conv1_filters, 72, 72]` by default.
    pub conv1: Tensor<T>,
    /// Rectified second-convolution maps, `[N, conv2_filters, 34, 34]`.
    pub conv2: Tensor<T>,
    /// Concatenated texture vector, `[N, 96]`.
    pub texture: Tensor<T>,
    pub dense1: Tensor<T>,
    pub dense2: Tensor<T>,
}

/// The texture CNN: two valid convolutions, one max-pool, energy pooling of
/// both convolution stages and a three-layer dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: ArchConfig,
    geometry: Geometry,
    params: Vec<Tensor<T>>,
    seed: Option<u64>,
}

enum BranchCache<T> {
    Energy(EnergyCache<T>),
    Max(GlobalMaxCache),
}

struct Trace<T> {
    conv1: Conv2dCache<T>,
    relu1: ReluCache,
    pool: MaxPoolCache,
    conv2: Conv2dCache<T>,
    relu2: ReluCache,
    energy2: EnergyCache<T>,
    branch1: BranchCache<T>,
    concat: crate::nn::ConcatCache,
    dense1: DenseCache<T>,
    relu3: ReluCache,
    dense2: DenseCache<T>,
    relu4: ReluCache,
    output: DenseCache<T>,
}

/// Loss, gradients and class probabilities for one batch.
pub struct BatchGradients<T> {
    pub loss: T,
    pub grads: Vec<Tensor<T>>,
    pub probabilities: Tensor<T>,
}

impl<T: Scalar> Model<T> {
    /// Builds a freshly initialized model. Weights are drawn from the
    /// fan-in-scaled uniform `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`; biases
    /// start at zero.
    pub fn build(config: ArchConfig, seed: u64) -> Result<Self> {
        let geometry = config.geometry()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|(_, shape)| {
                if shape.len() == 1 {
                    return Tensor::zeros(&shape);
                }
                let fan_in: usize = if shape.len() == 4 {
                    shape[1..].iter().product()
                } else {
                    shape[0]
                };
                let bound = (6.0 / fan_in as f64).sqrt();
                let len = shape.iter().product();
                let data = (0..len)
                    .map(|_| T::from_f64_lossy(rng.random_range(-bound..=bound)))
                    .collect();
                Tensor::from_vec(&shape, data).expect("shape from config")
            })
            .collect();
        Ok(Self {
            config,
            geometry,
            params,
            seed: Some(seed),
        })
    }

    /// Assembles a model from explicit parameter records, checking every
    /// shape against the architecture.
    pub fn from_params(config: ArchConfig, params: Vec<Tensor<T>>) -> Result<Self> {
        let geometry = config.geometry()?;
        let expected = config.param_shapes();
        if params.len() != expected.len() {
            return Err(shape_err!(
                "expected {} parameter records, got {}",
                expected.len(),
                params.len()
            ));
        }
        for ((name, shape), p) in expected.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(shape_err!(
                    "{name}: shape {:?} does not match architecture {:?}",
                    p.shape(),
                    shape
                ));
            }
        }
        Ok(Self {
            config,
            geometry,
            params,
            seed: None,
        })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_names(&self) -> [&'static str; 10] {
        PARAM_NAMES
    }

    /// Total number of trainable scalars.
    pub fn count_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            geometry: self.geometry,
            params: self.params.iter().map(Tensor::cast).collect(),
            seed: self.seed,
        }
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = batch.dims4()?;
        let s = self.config.input_size;
        if c != self.config.input_channels || h != s || w != s {
            return Err(shape_err!(
                "model expects [N, {}, {s}, {s}], got {:?}",
                self.config.input_channels,
                batch.shape()
            ));
        }
        Ok(())
    }

    fn run(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Trace<T>, ActivationBundle<T>)> {
        self.check_input(batch)?;
        let p = &self.params;
        let g = self.geometry;

        let (c1, conv1) = conv2d(batch, &p[CONV1_K], &p[CONV1_B], self.config.conv1_stride)?;
        debug_assert_eq!(c1.shape()[2], g.conv1);
        let (a1, relu1) = relu(&c1);
        drop(c1);
        let (p1, pool) = maxpool2d(&a1, self.config.pool_window, self.config.pool_stride)?;
        debug_assert_eq!(p1.shape()[2], g.pool);
        let (c2, conv2) = conv2d(&p1, &p[CONV2_K], &p[CONV2_B], self.config.conv2_stride)?;
        debug_assert_eq!(c2.shape()[2], g.conv2);
        let (a2, relu2) = relu(&c2);
        drop(c2);

        let (e2, energy2) = energy_pool(&a2)?;
        let (e1, branch1) = match self.config.conv1_pooling {
            BranchPooling::Energy => {
                let (e, c) = energy_pool(&a1)?;
                (e, BranchCache::Energy(c))
            }
            BranchPooling::Max => {
                let (e, c) = global_max_pool(&a1)?;
                (e, BranchCache::Max(c))
            }
        };
        let (texture, concat_cache) = concat(&[&e2, &e1])?;

        let (z1, dense1) = dense(&texture, &p[DENSE1_W], &p[DENSE1_B])?;
        let (h1, relu3) = relu(&z1);
        let (z2, dense2) = dense(&h1, &p[DENSE2_W], &p[DENSE2_B])?;
        let (h2, relu4) = relu(&z2);
        let (logits, output) = dense(&h2, &p[OUT_W], &p[OUT_B])?;

        let trace = Trace {
            conv1,
            relu1,
            pool,
            conv2,
            relu2,
            energy2,
            branch1,
            concat: concat_cache,
            dense1,
            relu3,
            dense2,
            relu4,
            output,
        };
        let bundle = ActivationBundle {
            conv1: a1,
            conv2: a2,
            texture,
            dense1: h1,
            dense2: h2,
        };
        Ok((logits, trace, bundle))
    }

    /// Logits `[N, classes]`, plus the captured activations when requested.
    pub fn forward(
        &self,
        batch: &Tensor<T>,
        capture: bool,
    ) -> Result<(Tensor<T>, Option<ActivationBundle<T>>)> {
        let (logits, _, bundle) = self.run(batch)?;
        Ok((logits, capture.then_some(bundle)))
    }

    /// Mean cross-entropy loss and its gradient with respect to every
    /// parameter record.
    pub fn gradients(&self, batch: &Tensor<T>, targets: &[usize]) -> Result<BatchGradients<T>> {
        let (logits, t, _) = self.run(batch)?;
        let out = softmax_xent(&logits, targets)?;

        let g_out = dense_backward(t.output, &out.grad_logits)?;
        let g_h2 = relu_backward(t.relu4, &g_out.input)?;
        let g_d2 = dense_backward(t.dense2, &g_h2)?;
        let g_h1 = relu_backward(t.relu3, &g_d2.input)?;
        let g_d1 = dense_backward(t.dense1, &g_h1)?;

        let mut split = concat_backward(t.concat, &g_d1.input)?.into_iter();
        let g_e2 = split.next().expect("two parts");
        let g_e1 = split.next().expect("two parts");

        let g_a2 = energy_pool_backward(t.energy2, &g_e2)?;
        let g_c2 = relu_backward(t.relu2, &g_a2)?;
        let g_conv2 = conv2d_backward(t.conv2, &g_c2, true)?;
        let g_p1 = g_conv2.input.expect("requested");
        let mut g_a1 = maxpool2d_backward(t.pool, &g_p1)?;
        let g_branch = match t.branch1 {
            BranchCache::Energy(c) => energy_pool_backward(c, &g_e1)?,
            BranchCache::Max(c) => global_max_pool_backward(c, &g_e1)?,
        };
        for (a, b) in g_a1.data_mut().iter_mut().zip(g_branch.data()) {
            *a = *a + *b;
        }
        let g_c1 = relu_backward(t.relu1, &g_a1)?;
        let g_conv1 = conv2d_backward(t.conv1, &g_c1, false)?;

        Ok(BatchGradients {
            loss: out.loss,
            grads: vec![
                g_conv1.kernels,
                g_conv1.bias,
                g_conv2.kernels,
                g_conv2.bias,
                g_d1.weights,
                g_d1.bias,
                g_d2.weights,
                g_d2.bias,
                g_out.weights,
                g_out.bias,
            ],
            probabilities: out.probabilities,
        })
    }

    /// One optimization step on a batch. Returns the pre-update loss.
    pub fn train_step(
        &mut self,
        batch: &Tensor<T>,
        targets: &[usize],
        state: &mut OptimizerState<T>,
        optimizer: &OptimizerConfig,
    ) -> Result<T> {
        let (n, ..) = batch.dims4()?;
        if n != targets.len() {
            return Err(shape_err!("{n} images but {} targets", targets.len()));
        }
        let g = self.gradients(batch, targets)?;
        if !g.loss.is_finite() {
            return Err(Error::NonFiniteLoss(g.loss.as_f64()));
        }
        state
            .step(optimizer, &mut self.params, &g.grads)
            .map_err(|e| match e {
                Error::NonFiniteGradient(idx) => {
                    let i: usize = idx.trim_start_matches('#').parse().unwrap_or(0);
                    Error::NonFiniteGradient(PARAM_NAMES[i.min(9)].to_string())
                }
                other => other,
            })?;
        Ok(g.loss)
    }

    /// Argmax class per row; ties resolve to the lowest index.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let (logits, _) = self.forward(batch, false)?;
        Ok(argmax_rows(&logits))
    }
}

pub fn argmax_rows<T: Scalar>(scores: &Tensor<T>) -> Vec<usize> {
    let k = scores.shape()[scores.rank() - 1];
    scores
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
