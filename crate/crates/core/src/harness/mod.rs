//! Experiment harness: synthetic corpus, manifests, splits, training with
//! early stopping, evaluation and reporting.

mod config;
mod experiment;
mod manifest;
mod metrics;
mod report;
mod seed;
mod split;
mod synth;
mod train;

pub use config::{BaselineConfig, ExperimentConfig, PipelineConfig};
pub use experiment::{
    evaluate_subset, extract_all, run_baseline, run_cv, run_experiment, BaselineResult,
    CvFoldRow, CvResult, Dataset, ExperimentResult, SubsetEvaluation,
};
pub use manifest::{Label, Manifest, ManifestRecord, Subset};
pub use metrics::{
    evaluate_predictions, majority_vote, mean_std, Aggregation, ConfusionMatrix, SubsetMetrics,
};
pub use report::{
    baseline_csv, baseline_text, cv_csv, cv_text, holdout_csv, holdout_text, read_report_csv,
    write_baseline_reports, write_cv_reports, write_holdout_reports, REPORT_CSV_HEADER,
};
pub use seed::{derive_seed, derived_rng};
pub use split::{
    apportion, cv_rotation, make_folds, make_holdout, SplitAssignment, SplitMode, SplitSpec,
};
pub use synth::{patch_file_name, source_id, synth_dataset, synth_image, ClassTexture, SynthConfig};
pub use train::{
    history_csv, train, Classifier, EarlyStopping, EpochRecord, LabeledPatches, Predictions,
    Preprocessor, StopDecision, StopReason, TrainConfig, TrainOutcome,
};
