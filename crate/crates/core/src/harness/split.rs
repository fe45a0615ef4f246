//! Source-image level partitions: stratified folds and the hold-out split.
//!
//! Splits assign whole source images, never individual patches, so the
//! overlapping windows of one image cannot leak across subsets.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::manifest::{Label, Manifest, Subset};
use super::seed::{derived_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    CrossValidation,
    HoldOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// Fraction of source images in each fold.
    pub fold_fractions: Vec<f64>,
    /// Number of leading folds merged into the hold-out training set.
    pub holdout_train_folds: usize,
    /// Share of the hold-out training images moved to validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            mode: SplitMode::HoldOut,
            fold_fractions: vec![0.34, 0.34, 0.32],
            holdout_train_folds: 2,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.fold_fractions.len();
        if k < 2 {
            return Err(Error::Config("at least two folds are required".into()));
        }
        if self.fold_fractions.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Config("fold fractions must be positive".into()));
        }
        let total: f64 = self.fold_fractions.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "fold fractions sum to {total}, expected 1"
            )));
        }
        if self.holdout_train_folds == 0 || self.holdout_train_folds >= k {
            return Err(Error::Config(format!(
                "hold-out must merge between 1 and {} folds for training",
                k - 1
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Source image ids per subset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn get(&self, subset: Subset) -> &[String] {
        match subset {
            Subset::Train => &self.train,
            Subset::Validation => &self.validation,
            Subset::Test => &self.test,
        }
    }

    pub fn subset_of(&self, source_id: &str) -> Option<Subset> {
        Subset::ALL
            .into_iter()
            .find(|&s| self.get(s).iter().any(|id| id == source_id))
    }

    /// Fails if any source image appears in more than one subset.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in Subset::ALL {
            for id in self.get(s) {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Dataset(format!(
                        "source image `{id}` appears in more than one subset"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy of the manifest with each record tagged by its subset; records of
    /// unassigned sources are dropped.
    pub fn tag(&self, manifest: &Manifest) -> Manifest {
        let records = manifest
            .records
            .iter()
            .filter_map(|r| {
                self.subset_of(&r.source_id).map(|s| {
                    let mut r = r.clone();
                    r.split = Some(s);
                    r
                })
            })
            .collect();
        Manifest {
            root: manifest.root.clone(),
            records,
        }
    }

    /// Rebuilds the assignment from split tags in a manifest.
    pub fn from_tags(manifest: &Manifest) -> Result<Self> {
        let mut a = Self::default();
        for (id, _) in manifest.sources() {
            let tags: HashSet<Option<Subset>> = manifest
                .records
                .iter()
                .filter(|r| r.source_id == id)
                .map(|r| r.split)
                .collect();
            if tags.len() != 1 {
                return Err(Error::Dataset(format!(
                    "patches of source image `{id}` carry different split tags"
                )));
            }
            match tags.into_iter().next().flatten() {
                Some(Subset::Train) => a.train.push(id),
                Some(Subset::Validation) => a.validation.push(id),
                Some(Subset::Test) => a.test.push(id),
                None => {
                    return Err(Error::Dataset(format!(
                        "source image `{id}` has no split tag"
                    )))
                }
            }
        }
        a.check_disjoint()?;
        Ok(a)
    }
}

/// Splits `total` into integer parts proportional to `fractions` using the
/// largest-remainder rule (ties go to the earlier part).
pub fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let sum: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| total as f64 * f / sum).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let missing = total - parts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        parts[i] += 1;
    }
    parts
}

/// Per-class shuffled source ids, classes in `Label::ALL` order.
fn shuffled_by_class(manifest: &Manifest, seed: u64) -> Vec<Vec<String>> {
    let sources = manifest.sources();
    Label::ALL
        .iter()
        .map(|&label| {
            let mut ids: Vec<String> = sources
                .iter()
                .filter(|(_, l)| *l == label)
                .map(|(id, _)| id.clone())
                .collect();
            ids.sort();
            ids.shuffle(&mut derived_rng(seed, &[stream::SPLIT, label.index() as u64]));
            ids
        })
        .collect()
}

/// Stratified partition of the source images into `spec.fold_fractions.len()`
/// folds. Each class is split by the largest-remainder rule.
pub fn make_folds(manifest: &Manifest, spec: &SplitSpec) -> Result<Vec<Vec<String>>> {
    spec.validate()?;
    let k = spec.fold_fractions.len();
    let n_sources = manifest.sources().len();
    if n_sources < k {
        return Err(Error::Dataset(format!(
            "{n_sources} source images cannot fill {k} folds"
        )));
    }
    let mut folds = vec![Vec::new(); k];
    for ids in shuffled_by_class(manifest, spec.seed) {
        let counts = apportion(ids.len(), &spec.fold_fractions);
        let mut it = ids.into_iter();
        for (fold, &c) in folds.iter_mut().zip(&counts) {
            fold.extend(it.by_ref().take(c));
        }
    }
    if folds.iter().any(Vec::is_empty) {
        return Err(Error::Dataset(
            "a fold received no source images; add more images".into(),
        ));
    }
    Ok(folds)
}

/// Rotation `r` of a cross-validation run: fold `r` trains, fold `r + 1`
/// validates and fold `r + 2` tests (indices modulo the fold count).
pub fn cv_rotation(folds: &[Vec<String>], r: usize) -> Result<SplitAssignment> {
    let k = folds.len();
    if k < 3 {
        return Err(Error::Config(format!(
            "cross-validation needs 3 folds, got {k}"
        )));
    }
    let a = SplitAssignment {
        train: folds[r % k].clone(),
        validation: folds[(r + 1) % k].clone(),
        test: folds[(r + 2) % k].clone(),
    };
    a.check_disjoint()?;
    Ok(a)
}

/// Leading folds form the training set, the remaining folds the test set;
/// `validation_fraction` of the training images (rounded on the total and
/// stratified across classes) move to validation.
pub fn make_holdout(manifest: &Manifest, spec: &SplitSpec) -> Result<SplitAssignment> {
    let folds = make_folds(manifest, spec)?;
    let train_pool: Vec<String> = folds[..spec.holdout_train_folds].concat();
    let test: Vec<String> = folds[spec.holdout_train_folds..].concat();

    let labels: std::collections::HashMap<String, Label> = manifest.sources().into_iter().collect();
    let by_class: Vec<Vec<&String>> = Label::ALL
        .iter()
        .map(|&l| train_pool.iter().filter(|id| labels[*id] == l).collect())
        .collect();
    let target = (train_pool.len() as f64 * spec.validation_fraction).round() as usize;
    let class_sizes: Vec<f64> = by_class.iter().map(|v| v.len() as f64).collect();
    let quotas = apportion(target, &class_sizes);

    let mut a = SplitAssignment {
        test,
        ..SplitAssignment::default()
    };
    for (ids, q) in by_class.iter().zip(quotas) {
        // the fold contents are already shuffled; take from the end
        let cut = ids.len() - q.min(ids.len());
        a.train.extend(ids[..cut].iter().map(|s| (*s).clone()));
        a.validation.extend(ids[cut..].iter().map(|s| (*s).clone()));
    }
    a.check_disjoint()?;
    Ok(a)
}
