use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

use super::manifest::Label;

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(shape_err!(
                "{} labels for {} predictions",
                truth.len(),
                predicted.len()
            ));
        }
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(shape_err!("class index out of range for {classes} classes"));
            }
            m.counts[t * classes + p] += 1;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    /// Trace over total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn row_sum(&self, truth: usize) -> usize {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn column_sum(&self, predicted: usize) -> usize {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    /// `None` when the class is never predicted.
    pub fn precision(&self, class: usize) -> Option<f64> {
        match self.column_sum(class) {
            0 => None,
            s => Some(self.get(class, class) as f64 / s as f64),
        }
    }

    /// `None` when the class never occurs.
    pub fn recall(&self, class: usize) -> Option<f64> {
        match self.row_sum(class) {
            0 => None,
            s => Some(self.get(class, class) as f64 / s as f64),
        }
    }

    /// CSV with a header row of predicted classes and one row per true class.
    pub fn to_csv(&self) -> String {
        let name = |i: usize| Label::from_index(i).map_or_else(|| i.to_string(), |l| l.to_string());
        let mut s = String::from("truth\\predicted");
        for p in 0..self.classes {
            s.push(',');
            s.push_str(&name(p));
        }
        s.push('\n');
        for t in 0..self.classes {
            s.push_str(&name(t));
            for p in 0..self.classes {
                s.push_str(&format!(",{}", self.get(t, p)));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Every patch scored on its own.
    Patch,
    /// Majority vote over the patches of each source image.
    Image,
}

impl std::str::FromStr for Aggregation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patch" => Ok(Self::Patch),
            "image" => Ok(Self::Image),
            _ => Err(crate::Error::Config(format!(
                "unknown aggregation `{s}` (expected patch or image)"
            ))),
        }
    }
}

/// Most frequent class; ties go to the most severe (highest index) class.
pub fn majority_vote(predictions: &[usize], classes: usize) -> usize {
    let mut votes = vec![0usize; classes];
    for &p in predictions {
        votes[p] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v >= votes[best] {
            best = c;
        }
    }
    best
}

/// Confusion matrix at the requested granularity. `source_ids` groups
/// patches into images; image groups keep their first-appearance order.
pub fn evaluate_predictions(
    classes: usize,
    truth: &[usize],
    predicted: &[usize],
    source_ids: &[String],
    aggregation: Aggregation,
) -> Result<ConfusionMatrix> {
    match aggregation {
        Aggregation::Patch => ConfusionMatrix::from_pairs(classes, truth, predicted),
        Aggregation::Image => {
            if source_ids.len() != truth.len() || predicted.len() != truth.len() {
                return Err(shape_err!("image aggregation needs one source id per patch"));
            }
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
            let mut index: HashMap<&str, usize> = HashMap::new();
            for ((id, &t), &p) in source_ids.iter().zip(truth).zip(predicted) {
                let g = *index.entry(id.as_str()).or_insert_with(|| {
                    groups.push((t, Vec::new()));
                    groups.len() - 1
                });
                if groups[g].0 != t {
                    return Err(shape_err!("source image `{id}` has patches with different labels"));
                }
                groups[g].1.push(p);
            }
            let t: Vec<usize> = groups.iter().map(|g| g.0).collect();
            let p: Vec<usize> = groups.iter().map(|g| majority_vote(&g.1, classes)).collect();
            ConfusionMatrix::from_pairs(classes, &t, &p)
        }
    }
}

/// Scores of one subset at one granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub accuracy: f64,
    /// Mean cross-entropy (patch level only).
    pub loss: Option<f64>,
    /// Mean squared error between probabilities and one-hot targets (patch level only).
    pub mse: Option<f64>,
    pub confusion: ConfusionMatrix,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
