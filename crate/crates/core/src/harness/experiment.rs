use rayon::prelude::*;

use crate::baselines::{extract_features, predict_linear, train_linear, FeatureVector, LinearModel};
use crate::error::{Error, Result};
use crate::pipeline::GrayImage;
use crate::tensor::Scalar;

use super::config::{BaselineConfig, ExperimentConfig};
use super::manifest::{Manifest, Subset};
use super::metrics::{evaluate_predictions, Aggregation, SubsetMetrics};
use super::split::{cv_rotation, make_folds, SplitAssignment};
use super::train::{train, Classifier, LabeledPatches, TrainOutcome};

/// A manifest with every patch decoded in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub patches: LabeledPatches,
}

impl Dataset {
    pub fn load(manifest: Manifest) -> Result<Self> {
        let images: Vec<GrayImage> = manifest
            .records
            .par_iter()
            .map(|r| GrayImage::load(manifest.resolve(r)))
            .collect::<Result<_>>()?;
        let patches = LabeledPatches {
            images,
            labels: manifest.records.iter().map(|r| r.label.index()).collect(),
            source_ids: manifest.records.iter().map(|r| r.source_id.clone()).collect(),
            keys: (0..manifest.records.len() as u64).collect(),
        };
        Ok(Self { manifest, patches })
    }

    /// Patches whose source image is in `ids`, in manifest order.
    pub fn select(&self, ids: &[String]) -> LabeledPatches {
        let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
        let mut out = LabeledPatches::default();
        for i in 0..self.patches.len() {
            if wanted.contains(self.patches.source_ids[i].as_str()) {
                out.images.push(self.patches.images[i].clone());
                out.labels.push(self.patches.labels[i]);
                out.source_ids.push(self.patches.source_ids[i].clone());
                out.keys.push(self.patches.keys[i]);
            }
        }
        out
    }

    pub fn source_count(&self) -> usize {
        self.manifest.sources().len()
    }
}

/// Patch- and image-level scores of one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetEvaluation {
    pub subset: Subset,
    pub images: usize,
    pub patches: usize,
    pub patch: SubsetMetrics,
    pub image: SubsetMetrics,
}

impl SubsetEvaluation {
    pub fn at(&self, aggregation: Aggregation) -> &SubsetMetrics {
        match aggregation {
            Aggregation::Patch => &self.patch,
            Aggregation::Image => &self.image,
        }
    }
}

fn score(
    subset: Subset,
    data: &LabeledPatches,
    classes: usize,
    predicted: &[usize],
    loss: Option<f64>,
    mse: Option<f64>,
) -> Result<SubsetEvaluation> {
    let metrics = |agg| -> Result<SubsetMetrics> {
        let confusion = evaluate_predictions(classes, &data.labels, predicted, &data.source_ids, agg)?;
        let patch = agg == Aggregation::Patch;
        Ok(SubsetMetrics {
            accuracy: confusion.accuracy(),
            loss: loss.filter(|_| patch),
            mse: mse.filter(|_| patch),
            confusion,
        })
    };
    let image = metrics(Aggregation::Image)?;
    Ok(SubsetEvaluation {
        subset,
        images: image.confusion.total(),
        patches: data.len(),
        patch: metrics(Aggregation::Patch)?,
        image,
    })
}

pub fn evaluate_subset<T: Scalar>(
    classifier: &Classifier<T>,
    subset: Subset,
    data: &LabeledPatches,
    batch_size: usize,
) -> Result<SubsetEvaluation> {
    let p = classifier.evaluate(data, batch_size)?;
    score(subset, data, classifier.classes(), &p.predicted, Some(p.loss), Some(p.mse))
}

#[derive(Debug, Clone)]
pub struct ExperimentResult<T: Scalar> {
    pub outcome: TrainOutcome<T>,
    /// Train, validation and test, in that order.
    pub evaluations: Vec<SubsetEvaluation>,
    pub total_images: usize,
}

impl<T: Scalar> ExperimentResult<T> {
    pub fn evaluation(&self, subset: Subset) -> &SubsetEvaluation {
        self.evaluations
            .iter()
            .find(|e| e.subset == subset)
            .expect("all subsets evaluated")
    }
}

fn non_empty(dataset: &Dataset, assignment: &SplitAssignment) -> Result<[LabeledPatches; 3]> {
    assignment.check_disjoint()?;
    let sets = Subset::ALL.map(|s| dataset.select(assignment.get(s)));
    for (s, d) in Subset::ALL.iter().zip(&sets) {
        if d.is_empty() {
            return Err(Error::Dataset(format!("the {s} subset is empty")));
        }
    }
    Ok(sets)
}

/// Trains on the train subset with early stopping on validation, then scores
/// all three subsets.
pub fn run_experiment<T: Scalar>(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult<T>> {
    let [tr, va, te] = non_empty(dataset, assignment)?;
    let outcome = train::<T>(&cfg.arch, &cfg.train, &tr, &va)?;
    let batch = cfg.train.eval_batch_size;
    let evaluations = [(Subset::Train, &tr), (Subset::Validation, &va), (Subset::Test, &te)]
        .into_iter()
        .map(|(s, d)| evaluate_subset(&outcome.classifier, s, d, batch))
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        outcome,
        evaluations,
        total_images: dataset.source_count(),
    })
}

/// One row of the cross-validation table: the scores of fold `fold` when it
/// served as training, validation and test set.
#[derive(Debug, Clone)]
pub struct CvFoldRow {
    /// 1-based fold number.
    pub fold: usize,
    pub images: usize,
    pub train: SubsetEvaluation,
    pub validation: SubsetEvaluation,
    pub test: SubsetEvaluation,
}

#[derive(Debug, Clone)]
pub struct CvResult<T: Scalar> {
    /// Rotation `r` trains on fold `r`, validates on `r + 1`, tests on `r + 2`.
    pub rotations: Vec<ExperimentResult<T>>,
    pub rows: Vec<CvFoldRow>,
    pub total_images: usize,
}

impl<T: Scalar> CvResult<T> {
    pub fn test_accuracies(&self, aggregation: Aggregation) -> Vec<f64> {
        self.rows.iter().map(|r| r.test.at(aggregation).accuracy).collect()
    }
}

/// Three-fold rotation: every fold is used once for training, once for
/// validation and once for testing.
pub fn run_cv<T: Scalar>(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<CvResult<T>> {
    let folds = make_folds(&dataset.manifest, &cfg.split)?;
    let k = folds.len();
    if k != 3 {
        return Err(Error::Config(format!(
            "cross-validation is defined for 3 folds, got {k}"
        )));
    }
    let mut rotations = Vec::with_capacity(k);
    for r in 0..k {
        log::info!("cross-validation rotation {}/{k}", r + 1);
        rotations.push(run_experiment::<T>(dataset, &cv_rotation(&folds, r)?, cfg)?);
    }
    let rows = (0..k)
        .map(|f| CvFoldRow {
            fold: f + 1,
            images: folds[f].len(),
            train: rotations[f].evaluation(Subset::Train).clone(),
            validation: rotations[(f + k - 1) % k].evaluation(Subset::Validation).clone(),
            test: rotations[(f + k - 2) % k].evaluation(Subset::Test).clone(),
        })
        .collect();
    Ok(CvResult {
        rotations,
        rows,
        total_images: dataset.source_count(),
    })
}

/// Handcrafted features for every patch, in order.
pub fn extract_all(data: &LabeledPatches, cfg: &BaselineConfig) -> Result<Vec<FeatureVector>> {
    data.images
        .par_iter()
        .map(|p| extract_features(p, &cfg.lpq, &cfg.glcm))
        .collect()
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub model: LinearModel,
    pub evaluations: Vec<SubsetEvaluation>,
    pub total_images: usize,
}

impl BaselineResult {
    pub fn evaluation(&self, subset: Subset) -> &SubsetEvaluation {
        self.evaluations
            .iter()
            .find(|e| e.subset == subset)
            .expect("all subsets evaluated")
    }
}

/// LPQ + Haralick features with a linear classifier fitted on the train
/// subset.
pub fn run_baseline(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    cfg: &BaselineConfig,
    classes: usize,
) -> Result<BaselineResult> {
    let sets = non_empty(dataset, assignment)?;
    let features: Vec<Vec<Vec<f64>>> = sets
        .iter()
        .map(|d| Ok(extract_all(d, cfg)?.into_iter().map(|f| f.values).collect()))
        .collect::<Result<_>>()?;
    let model = train_linear(&features[0], &sets[0].labels, classes, &cfg.linear)?;
    let evaluations = Subset::ALL
        .iter()
        .zip(&sets)
        .zip(&features)
        .map(|((&s, d), f)| score(s, d, classes, &predict_linear(&model, f)?, None, None))
        .collect::<Result<_>>()?;
    Ok(BaselineResult {
        model,
        evaluations,
        total_images: dataset.source_count(),
    })
}
