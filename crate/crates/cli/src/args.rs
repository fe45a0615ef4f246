use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Holdout,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Patch,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayerArg {
    Conv1,
    Conv2,
}

/// Compact texture CNN for pipe-surface corrosion grading.
#[derive(Debug, Parser)]
#[command(name = "tcnn", version, about)]
pub struct Cli {
    /// TOML configuration file (sections: arch, train, pipeline, synth, split, baseline).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for synthesis, splitting and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Floating-point precision of the network.
    #[arg(long, global = true, value_enum, default_value = "f32")]
    pub precision: Precision,

    /// Directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Override a configuration value, e.g. `--set train.max_epochs=30`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus: strips, patches and manifest.
    Synth,
    /// Unfold a bore image onto log-polar axes.
    Unfold {
        input: PathBuf,
        /// Output file (default: <out-dir>/<stem>_unfolded.png).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cut an unfolded strip into overlapping square patches.
    Slice {
        input: PathBuf,
        /// Source id used in patch file names (default: input file stem).
        #[arg(long)]
        source_id: Option<String>,
    },
    /// Assign source images to subsets and write tagged manifests.
    Split {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "holdout")]
        mode: Mode,
    },
    /// Hold-out training and evaluation; saves the model and reports.
    Train { manifest: PathBuf },
    /// Three-fold cross-validation reports.
    Cv { manifest: PathBuf },
    /// Score a saved model on a manifest.
    Eval {
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Restrict to records carrying this split tag.
        #[arg(long, value_enum)]
        subset: Option<SubsetArg>,
        #[arg(long, value_enum, default_value = "patch")]
        aggregation: AggregationArg,
    },
    /// Classify patches, or whole strips by majority vote over their patches.
    Infer {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Export LPQ + Haralick features of every patch as CSV.
    Features {
        manifest: PathBuf,
        /// Output file (default: <out-dir>/features.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train and score the handcrafted-feature linear baseline.
    BaselineTrain { manifest: PathBuf },
    /// Save the rectified feature maps of one convolution layer as images.
    Activations {
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "conv1")]
        layer: LayerArg,
    },
    /// Print the per-layer parameter table.
    Params,
}
