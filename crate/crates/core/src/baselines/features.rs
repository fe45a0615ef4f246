use std::io::Write;
use std::ops::Range;

use crate::error::{shape_err, Result};
use crate::pipeline::GrayImage;

use super::glcm::{glcm, GlcmConfig};
use super::haralick::{haralick_features, HARALICK_LEN, HARALICK_NAMES};
use super::lpq::{lpq_descriptor, LpqConfig, LPQ_BINS};

pub const FEATURE_LEN: usize = LPQ_BINS + HARALICK_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descriptor {
    Lpq,
    Haralick,
}

/// Concatenated handcrafted descriptors with the span each one occupies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub spans: Vec<(Descriptor, Range<usize>)>,
}

impl FeatureVector {
    pub fn span(&self, which: Descriptor) -> Option<&[f64]> {
        self.spans
            .iter()
            .find(|(d, _)| *d == which)
            .map(|(_, r)| &self.values[r.clone()])
    }
}

/// LPQ histogram (256) followed by the Haralick statistics (13).
pub fn extract_features(
    patch: &GrayImage,
    lpq: &LpqConfig,
    glcm_cfg: &GlcmConfig,
) -> Result<FeatureVector> {
    let mut values = lpq_descriptor(patch, lpq)?;
    values.extend(haralick_features(&glcm(patch, glcm_cfg)?));
    Ok(FeatureVector {
        values,
        spans: vec![
            (Descriptor::Lpq, 0..LPQ_BINS),
            (Descriptor::Haralick, LPQ_BINS..FEATURE_LEN),
        ],
    })
}

pub fn feature_names() -> Vec<String> {
    (0..LPQ_BINS)
        .map(|i| format!("lpq_{i:03}"))
        .chain(HARALICK_NAMES.iter().map(|n| format!("haralick_{n}")))
        .collect()
}

/// CSV with a header naming every dimension and the label in the last column.
pub fn write_features_csv<W: Write>(
    mut out: W,
    rows: &[(FeatureVector, String)],
) -> std::io::Result<()> {
    let mut header = feature_names();
    header.push("label".into());
    writeln!(out, "{}", header.join(","))?;
    for (fv, label) in rows {
        for v in &fv.values {
            write!(out, "{v},")?;
        }
        writeln!(out, "{label}")?;
    }
    Ok(())
}

/// Parses a file written by [`write_features_csv`] into `(values, label)`.
pub fn read_features_csv(text: &str) -> Result<Vec<(Vec<f64>, String)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| shape_err!("empty feature CSV"))?;
    let width = header.split(',').count();
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(shape_err!(
                    "feature CSV row {} has {} cells, header has {width}",
                    i + 1,
                    cells.len()
                ));
            }
            let (label, values) = cells.split_last().expect("non-empty");
            let values = values
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| shape_err!("feature CSV row {}: bad number `{c}`", i + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((values, label.to_string()))
        })
        .collect()
}
