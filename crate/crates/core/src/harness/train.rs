//! Mini-batch training with per-epoch augmentation and early stopping on the
//! validation loss.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::model::{load_weights, save_weights, ArchConfig, Model};
use crate::nn::{softmax_xent, OptimizerConfig, OptimizerState};
use crate::pipeline::{augment, to_tensor, upscale_bicubic, AugmentConfig, GrayImage, Standardizer};
use crate::tensor::{Scalar, Tensor};

use super::seed::{derive_seed, derived_rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    /// Minimum decrease that counts as an improvement.
    pub min_delta: f64,
    pub augment: AugmentConfig,
    /// Standardize inputs with training-set mean and deviation.
    pub standardize: bool,
    pub eval_batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            min_delta: 0.0,
            augment: AugmentConfig::default(),
            standardize: true,
            eval_batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("batch sizes must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.min_delta < 0.0 {
            return Err(Error::Config("min_delta must be non-negative".into()));
        }
        self.optimizer.validate()?;
        self.augment.validate()
    }
}

/// Labelled patches kept at their native resolution.
#[derive(Debug, Clone, Default)]
pub struct LabeledPatches {
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    pub source_ids: Vec<String>,
    /// Stable per-patch key used to derive augmentation streams.
    pub keys: Vec<u64>,
}

impl LabeledPatches {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Upscaling, optional augmentation and standardization in front of the
/// network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub input_size: usize,
    pub standardizer: Standardizer,
}

impl Preprocessor {
    pub fn prepare(&self, patch: &GrayImage, augmentation: Option<(&AugmentConfig, u64)>) -> Result<GrayImage> {
        let up = upscale_bicubic(patch, self.input_size)?;
        Ok(match augmentation {
            Some((cfg, seed)) if cfg.enabled => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                augment(&up, cfg, &mut rng)
            }
            _ => up,
        })
    }

    /// Network input for `indices` of `data`. Each sample is prepared
    /// independently, so the result does not depend on the thread count.
    pub fn batch<T: Scalar>(
        &self,
        data: &LabeledPatches,
        indices: &[usize],
        augmentation: Option<(&AugmentConfig, u64, usize)>,
    ) -> Result<Tensor<T>> {
        let images: Vec<GrayImage> = indices
            .par_iter()
            .map(|&i| {
                let aug = augmentation.map(|(cfg, root, epoch)| {
                    (cfg, derive_seed(root, &[stream::AUGMENT, epoch as u64, data.keys[i]]))
                });
                self.prepare(&data.images[i], aug)
            })
            .collect::<Result<_>>()?;
        to_tensor(&images, Some(&self.standardizer))
    }
}

/// A network together with the input transform it was trained with.
#[derive(Debug, Clone)]
pub struct Classifier<T: Scalar> {
    pub model: Model<T>,
    pub preprocessor: Preprocessor,
}

/// Patch-level outputs of a classifier over a labelled set.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub predicted: Vec<usize>,
    /// Row-major `[n, classes]`.
    pub probabilities: Vec<f64>,
    pub loss: f64,
    pub mse: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    arch: ArchConfig,
    preprocessor: Preprocessor,
}

impl<T: Scalar> Classifier<T> {
    pub fn classes(&self) -> usize {
        self.model.config().classes
    }

    /// Predictions, mean cross-entropy and mean squared error against
    /// one-hot targets.
    pub fn evaluate(&self, data: &LabeledPatches, batch_size: usize) -> Result<Predictions> {
        if data.is_empty() {
            return Err(Error::Dataset("cannot evaluate an empty subset".into()));
        }
        let k = self.classes();
        let mut out = Predictions {
            predicted: Vec::with_capacity(data.len()),
            probabilities: Vec::with_capacity(data.len() * k),
            loss: 0.0,
            mse: 0.0,
        };
        let indices: Vec<usize> = (0..data.len()).collect();
        for chunk in indices.chunks(batch_size.max(1)) {
            let x = self.preprocessor.batch::<T>(data, chunk, None)?;
            let (logits, _) = self.model.forward(&x, false)?;
            let targets: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let sx = softmax_xent(&logits, &targets)?;
            out.loss += sx.loss.as_f64() * chunk.len() as f64;
            for (row, &t) in sx.probabilities.data().chunks(k).zip(&targets) {
                let mut best = 0;
                for (c, p) in row.iter().enumerate() {
                    let p = p.as_f64();
                    let target = if c == t { 1.0 } else { 0.0 };
                    out.mse += (p - target).powi(2);
                    out.probabilities.push(p);
                    if p > row[best].as_f64() {
                        best = c;
                    }
                }
                out.predicted.push(best);
            }
        }
        out.loss /= data.len() as f64;
        out.mse /= (data.len() * k) as f64;
        Ok(out)
    }

    /// Class probabilities for unlabelled patches, row-major `[n, classes]`.
    pub fn probabilities(&self, patches: &[GrayImage]) -> Result<Vec<f64>> {
        let k = self.classes();
        let data = LabeledPatches {
            images: patches.to_vec(),
            labels: vec![0; patches.len()],
            source_ids: vec![String::new(); patches.len()],
            keys: (0..patches.len() as u64).collect(),
        };
        let p = self.evaluate(&data, 64)?;
        debug_assert_eq!(p.probabilities.len(), patches.len() * k);
        Ok(p.probabilities)
    }

    /// Writes `<stem>.tcnw` (weights) and `<stem>.json` (architecture and
    /// input transform).
    pub fn save(&self, weights_path: &Path) -> Result<()> {
        save_weights(&self.model, weights_path)?;
        let sidecar = Sidecar {
            arch: self.model.config().clone(),
            preprocessor: self.preprocessor,
        };
        let path = weights_path.with_extension("json");
        let text = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(weights_path: &Path) -> Result<Self> {
        let path = weights_path.with_extension("json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        let model = load_weights(weights_path, &sidecar.arch)?;
        Ok(Self {
            model: model.cast(),
            preprocessor: sidecar.preprocessor,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best monitored value and counts epochs without improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: Option<(usize, f64)>,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: None,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> StopDecision {
        let improved = match self.best {
            None => value.is_finite(),
            Some((_, best)) => value < best - self.min_delta,
        };
        if improved {
            self.best = Some((epoch, value));
            self.waited = 0;
            return StopDecision::Improved;
        }
        self.waited += 1;
        if self.waited >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|b| b.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the augmented training batches.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_mse: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
    /// A loss or gradient became non-finite during this epoch.
    NonFinite { epoch: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub classifier: Classifier<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were kept (0 means the initial weights).
    pub best_epoch: usize,
    pub stop: StopReason,
}

fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Trains a fresh network on `train`, monitoring `validation` after every
/// epoch and returning the weights of the best validation epoch.
pub fn train<T: Scalar>(
    arch: &ArchConfig,
    cfg: &TrainConfig,
    train: &LabeledPatches,
    validation: &LabeledPatches,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Dataset(format!(
            "training needs non-empty train and validation sets ({} / {} patches)",
            train.len(),
            validation.len()
        )));
    }
    if let Some(&bad) = train.labels.iter().chain(&validation.labels).find(|&&l| l >= arch.classes) {
        return Err(Error::TargetOutOfRange {
            index: bad,
            classes: arch.classes,
        });
    }
    let standardizer = if cfg.standardize {
        Standardizer::fit(&train.images)?
    } else {
        Standardizer::IDENTITY
    };
    let preprocessor = Preprocessor {
        input_size: arch.input_size,
        standardizer,
    };
    if train.images.iter().any(|p| p.width() > arch.input_size || p.height() > arch.input_size) {
        return Err(shape_err!(
            "patches larger than the {0}x{0} network input",
            arch.input_size
        ));
    }

    let mut classifier = Classifier {
        model: Model::<T>::build(arch.clone(), derive_seed(cfg.seed, &[stream::INIT]))?,
        preprocessor,
    };
    let mut state = OptimizerState::new(classifier.model.params());
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut best_params = classifier.model.params().to_vec();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut derived_rng(cfg.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = preprocessor.batch::<T>(train, chunk, Some((&cfg.augment, cfg.seed, epoch)))?;
            let targets: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            match classifier.model.train_step(&x, &targets, &mut state, &cfg.optimizer) {
                Ok(loss) => loss_sum += loss.as_f64() * chunk.len() as f64,
                Err(e @ (Error::NonFiniteLoss(_) | Error::NonFiniteGradient(_))) => {
                    log::warn!("epoch {epoch}: {e}; keeping weights of epoch {best_epoch}");
                    stop = StopReason::NonFinite {
                        epoch,
                        detail: e.to_string(),
                    };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let val = classifier.evaluate(validation, cfg.eval_batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss: val.loss,
            val_mse: val.mse,
            val_accuracy: accuracy(&val.predicted, &validation.labels),
        };
        log::info!(
            "epoch {epoch:3}  train loss {:.4}  val loss {:.4}  val mse {:.4}  val acc {:.4}",
            record.train_loss,
            record.val_loss,
            record.val_mse,
            record.val_accuracy
        );
        history.push(record);
        if !val.loss.is_finite() {
            stop = StopReason::NonFinite {
                epoch,
                detail: format!("validation loss {}", val.loss),
            };
            break;
        }
        match stopper.observe(epoch, val.loss) {
            StopDecision::Improved => {
                best_params = classifier.model.params().to_vec();
                best_epoch = epoch;
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stop = StopReason::EarlyStopping;
                break;
            }
        }
    }
    classifier.model.params_mut().clone_from_slice(&best_params);
    Ok(TrainOutcome {
        classifier,
        history,
        best_epoch,
        stop,
    })
}

/// Per-epoch history as CSV.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_mse,val_accuracy\n");
    for r in history {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.train_loss, r.val_loss, r.val_mse, r.val_accuracy
        ));
    }
    s
}
