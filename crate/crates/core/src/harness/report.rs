//! Table-shaped text reports and machine-readable CSV files. Reports carry
//! no timings or paths so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Scalar;

use super::experiment::{BaselineResult, CvResult, ExperimentResult, SubsetEvaluation};
use super::manifest::Subset;
use super::metrics::{mean_std, Aggregation};
use super::train::{history_csv, StopReason};

pub const REPORT_CSV_HEADER: &str = "split,stage,accuracy,loss,mse";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stage_name(subset: Subset, aggregation: Aggregation) -> String {
    match aggregation {
        Aggregation::Patch => subset.to_string(),
        Aggregation::Image => format!("{subset}_image"),
    }
}

fn csv_rows(out: &mut String, split: &str, evals: &[&SubsetEvaluation]) {
    for agg in [Aggregation::Patch, Aggregation::Image] {
        for e in evals {
            let m = e.at(agg);
            let _ = writeln!(
                out,
                "{split},{},{},{},{}",
                stage_name(e.subset, agg),
                m.accuracy,
                opt(m.loss),
                opt(m.mse)
            );
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn stop_note(stop: &StopReason, best: usize, epochs: usize) -> String {
    let why = match stop {
        StopReason::MaxEpochs => "epoch limit".to_string(),
        StopReason::EarlyStopping => "early stopping".to_string(),
        StopReason::NonFinite { epoch, detail } => format!("non-finite values in epoch {epoch}: {detail}"),
    };
    format!("best epoch {best} of {epochs} ({why})")
}

pub fn holdout_csv<T: Scalar>(r: &ExperimentResult<T>) -> String {
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    let evals: Vec<&SubsetEvaluation> = r.evaluations.iter().collect();
    csv_rows(&mut s, "holdout", &evals);
    s
}

fn holdout_table(title: &str, evaluations: &[SubsetEvaluation], total_images: usize) -> String {
    let mut s = String::new();
    for (agg, heading) in [
        (Aggregation::Patch, "patch level"),
        (Aggregation::Image, "image level, majority vote"),
    ] {
        let _ = writeln!(s, "{title} ({heading})");
        let _ = writeln!(s, "{:<12}{:>12}{:>14}", "Dataset", "Images (%)", "Accuracy (%)");
        for e in evaluations {
            let name = match e.subset {
                Subset::Train => "Training",
                Subset::Validation => "Validation",
                Subset::Test => "Test",
            };
            let share = 100.0 * e.images as f64 / total_images as f64;
            let _ = writeln!(s, "{name:<12}{share:>12.1}{:>14}", pct(e.at(agg).accuracy));
        }
        s.push('\n');
    }
    s
}

pub fn holdout_text<T: Scalar>(r: &ExperimentResult<T>) -> String {
    let mut s = holdout_table("Hold-out evaluation", &r.evaluations, r.total_images);
    let o = &r.outcome;
    let _ = writeln!(s, "{}", stop_note(&o.stop, o.best_epoch, o.history.len()));
    s
}

pub fn cv_csv<T: Scalar>(r: &CvResult<T>) -> String {
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    for row in &r.rows {
        csv_rows(&mut s, &format!("fold{}", row.fold), &[&row.train, &row.validation, &row.test]);
    }
    for agg in [Aggregation::Patch, Aggregation::Image] {
        let (mean, std) = mean_std(&r.test_accuracies(agg));
        let stage = stage_name(Subset::Test, agg);
        let _ = writeln!(s, "mean,{stage},{mean},,");
        let _ = writeln!(s, "std,{stage},{std},,");
    }
    s
}

pub fn cv_text<T: Scalar>(r: &CvResult<T>) -> String {
    let mut s = String::new();
    for (agg, heading) in [
        (Aggregation::Patch, "patch level"),
        (Aggregation::Image, "image level, majority vote"),
    ] {
        let _ = writeln!(s, "3-fold cross-validation ({heading})");
        let _ = writeln!(
            s,
            "{:<6}{:>12}{:>12}{:>12}{:>12}",
            "Fold", "Images (%)", "Training", "Validation", "Test"
        );
        for row in &r.rows {
            let share = 100.0 * row.images as f64 / r.total_images as f64;
            let _ = writeln!(
                s,
                "{:<6}{share:>12.1}{:>12}{:>12}{:>12}",
                row.fold,
                pct(row.train.at(agg).accuracy),
                pct(row.validation.at(agg).accuracy),
                pct(row.test.at(agg).accuracy)
            );
        }
        let (mean, std) = mean_std(&r.test_accuracies(agg));
        let _ = writeln!(s, "Test accuracy: {} ± {} (mean ± std)", pct(mean), pct(std));
        s.push('\n');
    }
    for (i, rot) in r.rotations.iter().enumerate() {
        let o = &rot.outcome;
        let _ = writeln!(
            s,
            "rotation {}: {}",
            i + 1,
            stop_note(&o.stop, o.best_epoch, o.history.len())
        );
    }
    s
}

pub fn baseline_csv(r: &BaselineResult) -> String {
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    let evals: Vec<&SubsetEvaluation> = r.evaluations.iter().collect();
    csv_rows(&mut s, "baseline", &evals);
    s
}

pub fn baseline_text(r: &BaselineResult) -> String {
    holdout_table("LPQ + Haralick linear baseline", &r.evaluations, r.total_images)
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn confusion_files(
    dir: &Path,
    prefix: &str,
    evals: &[&SubsetEvaluation],
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    for e in evals {
        for agg in [Aggregation::Patch, Aggregation::Image] {
            let name = format!("confusion_{prefix}{}.csv", stage_name(e.subset, agg));
            write(dir, &name, &e.at(agg).confusion.to_csv(), written)?;
        }
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `report.csv`, `report.txt`, `history.csv` and one confusion matrix per
/// subset and granularity.
pub fn write_holdout_reports<T: Scalar>(dir: &Path, r: &ExperimentResult<T>) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    write(dir, "report.csv", &holdout_csv(r), &mut written)?;
    write(dir, "report.txt", &holdout_text(r), &mut written)?;
    write(dir, "history.csv", &history_csv(&r.outcome.history), &mut written)?;
    let evals: Vec<&SubsetEvaluation> = r.evaluations.iter().collect();
    confusion_files(dir, "", &evals, &mut written)?;
    Ok(written)
}

/// `report.csv`, `report.txt`, per-rotation histories and per-fold
/// confusion matrices.
pub fn write_cv_reports<T: Scalar>(dir: &Path, r: &CvResult<T>) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    write(dir, "report.csv", &cv_csv(r), &mut written)?;
    write(dir, "report.txt", &cv_text(r), &mut written)?;
    for (i, rot) in r.rotations.iter().enumerate() {
        let name = format!("history_rotation{}.csv", i + 1);
        write(dir, &name, &history_csv(&rot.outcome.history), &mut written)?;
    }
    for row in &r.rows {
        let prefix = format!("fold{}_", row.fold);
        confusion_files(dir, &prefix, &[&row.train, &row.validation, &row.test], &mut written)?;
    }
    Ok(written)
}

pub fn write_baseline_reports(dir: &Path, r: &BaselineResult) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    write(dir, "baseline_report.csv", &baseline_csv(r), &mut written)?;
    write(dir, "baseline_report.txt", &baseline_text(r), &mut written)?;
    let evals: Vec<&SubsetEvaluation> = r.evaluations.iter().collect();
    confusion_files(dir, "baseline_", &evals, &mut written)?;
    Ok(written)
}

/// Parses a `report.csv` into `(split, stage, accuracy)` rows.
pub fn read_report_csv(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_CSV_HEADER) {
        return Err(Error::Dataset("report CSV header mismatch".into()));
    }
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 5 {
                return Err(Error::Dataset(format!("malformed report row `{l}`")));
            }
            let acc = cells[2]
                .parse()
                .map_err(|_| Error::Dataset(format!("bad accuracy in `{l}`")))?;
            Ok((cells[0].to_string(), cells[1].to_string(), acc))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::{ConfusionMatrix, SubsetMetrics};

    fn eval(subset: Subset, truth: &[usize], pred: &[usize]) -> SubsetEvaluation {
        let c = ConfusionMatrix::from_pairs(3, truth, pred).unwrap();
        let m = SubsetMetrics {
            accuracy: c.accuracy(),
            loss: Some(0.5),
            mse: Some(0.1),
            confusion: c.clone(),
        };
        SubsetEvaluation {
            subset,
            images: truth.len(),
            patches: truth.len(),
            patch: m.clone(),
            image: SubsetMetrics {
                loss: None,
                mse: None,
                ..m
            },
        }
    }

    #[test]
    fn csv_rows_layout() {
        let e = eval(Subset::Test, &[0, 1, 2], &[0, 1, 1]);
        let mut s = String::new();
        csv_rows(&mut s, "holdout", &[&e]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], format!("holdout,test,{},0.5,0.1", 2.0 / 3.0));
        assert_eq!(lines[1], format!("holdout,test_image,{},,", 2.0 / 3.0));
        let parsed = read_report_csv(&format!("{REPORT_CSV_HEADER}\n{s}")).unwrap();
        assert_eq!(parsed[0].2, e.patch.confusion.accuracy());
    }

    #[test]
    fn table_has_three_rows() {
        let evals = vec![
            eval(Subset::Train, &[0, 1, 2], &[0, 1, 2]),
            eval(Subset::Validation, &[0], &[0]),
            eval(Subset::Test, &[0, 1], &[0, 0]),
        ];
        let t = holdout_table("Hold-out", &evals, 6);
        let rows: Vec<Vec<&str>> = t
            .lines()
            .take(5)
            .map(|l| l.split_whitespace().collect())
            .collect();
        assert_eq!(rows[2], ["Training", "50.0", "100.00"]);
        assert_eq!(rows[3], ["Validation", "16.7", "100.00"]);
        assert_eq!(rows[4], ["Test", "33.3", "50.00"]);
    }
}
