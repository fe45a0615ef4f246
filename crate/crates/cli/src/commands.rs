use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use tcnn_core::baselines::write_features_csv;
use tcnn_core::harness::{
    cv_rotation, derive_seed, evaluate_subset, extract_all, make_folds, make_holdout,
    majority_vote, run_baseline, run_cv, run_experiment, synth_dataset, write_baseline_reports,
    write_cv_reports, write_holdout_reports, Aggregation, Classifier, Dataset, ExperimentConfig,
    Label, Manifest, Preprocessor, SplitAssignment, Subset,
};
use tcnn_core::model::{export_activations, LayerSelector, Model};
use tcnn_core::pipeline::{slice_patches, to_tensor, unfold_log_polar, GrayImage, Standardizer};
use tcnn_core::Scalar;

use crate::args::{AggregationArg, Cli, Command, LayerArg, Mode, Precision, SubsetArg};

pub fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Synth => synth(cfg, out),
        Command::Unfold { input, output } => unfold(cfg, out, input, output.as_deref()),
        Command::Slice { input, source_id } => slice(cfg, out, input, source_id.as_deref()),
        Command::Split { manifest, mode } => split(cfg, out, manifest, *mode),
        Command::Train { manifest } => match cli.precision {
            Precision::F32 => train::<f32>(cfg, out, manifest),
            Precision::F64 => train::<f64>(cfg, out, manifest),
        },
        Command::Cv { manifest } => match cli.precision {
            Precision::F32 => cv::<f32>(cfg, out, manifest),
            Precision::F64 => cv::<f64>(cfg, out, manifest),
        },
        Command::Eval {
            manifest,
            model,
            subset,
            aggregation,
        } => match cli.precision {
            Precision::F32 => eval::<f32>(cfg, out, manifest, model, *subset, *aggregation),
            Precision::F64 => eval::<f64>(cfg, out, manifest, model, *subset, *aggregation),
        },
        Command::Infer { inputs, model } => match cli.precision {
            Precision::F32 => infer::<f32>(cfg, inputs, model),
            Precision::F64 => infer::<f64>(cfg, inputs, model),
        },
        Command::Features { manifest, output } => features(cfg, out, manifest, output.as_deref()),
        Command::BaselineTrain { manifest } => baseline(cfg, out, manifest),
        Command::Activations {
            input,
            model,
            layer,
        } => match cli.precision {
            Precision::F32 => activations::<f32>(cfg, out, input, model.as_deref(), *layer),
            Precision::F64 => activations::<f64>(cfg, out, input, model.as_deref(), *layer),
        },
        Command::Params => {
            params(cfg);
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synth(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let manifest = synth_dataset(&cfg.synth, &cfg.pipeline, out)?;
    println!(
        "wrote {} source images and {} patches to {}",
        manifest.sources().len(),
        manifest.len(),
        out.display()
    );
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn unfold(cfg: &ExperimentConfig, out: &Path, input: &Path, output: Option<&Path>) -> Result<()> {
    let img = GrayImage::load(input)?;
    let geom = cfg.pipeline.unfold.resolve(img.width(), img.height());
    let strip = unfold_log_polar(&img, &geom)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            create_dir(out)?;
            out.join(format!("{}_unfolded.png", stem(input)))
        }
    };
    strip.save(&path)?;
    println!(
        "{}x{} -> {}x{} ({})",
        img.width(),
        img.height(),
        strip.width(),
        strip.height(),
        path.display()
    );
    Ok(())
}

fn slice(cfg: &ExperimentConfig, out: &Path, input: &Path, source_id: Option<&str>) -> Result<()> {
    let img = GrayImage::load(input)?;
    let id = source_id.map_or_else(|| stem(input), str::to_string);
    let set = slice_patches(&img, cfg.pipeline.window, cfg.pipeline.overlap)?;
    create_dir(out)?;
    for (i, (patch, offset)) in set.patches.iter().zip(&set.offsets).enumerate() {
        let path = out.join(tcnn_core::harness::patch_file_name(&id, i));
        patch.save(&path)?;
        println!("{}\t{offset}", path.display());
    }
    println!("{} patches of {}x{} (stride {})", set.len(), set.window, set.window, set.stride);
    Ok(())
}

/// Split tags from the manifest when every record has one, otherwise a fresh
/// hold-out split.
fn assignment_for(manifest: &Manifest, cfg: &ExperimentConfig) -> Result<SplitAssignment> {
    if manifest.records.iter().all(|r| r.split.is_some()) && !manifest.is_empty() {
        Ok(SplitAssignment::from_tags(manifest)?)
    } else {
        Ok(make_holdout(manifest, &cfg.split)?)
    }
}

fn split(cfg: &ExperimentConfig, out: &Path, manifest_path: &Path, mode: Mode) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    create_dir(out)?;
    // Tagged manifests keep pointing at the original patch files.
    let rebase = |m: Manifest| -> Manifest {
        let root = std::path::absolute(&manifest.root).unwrap_or_else(|_| manifest.root.clone());
        let mut m = m;
        for r in &mut m.records {
            if Path::new(&r.path).is_relative() {
                r.path = root.join(&r.path).to_string_lossy().into_owned();
            }
        }
        m
    };
    let summary = |a: &SplitAssignment| {
        format!(
            "train {} / validation {} / test {} source images",
            a.train.len(),
            a.validation.len(),
            a.test.len()
        )
    };
    match mode {
        Mode::Holdout => {
            let a = make_holdout(&manifest, &cfg.split)?;
            let path = out.join("manifest_holdout.jsonl");
            rebase(a.tag(&manifest)).save(&path)?;
            println!("{}: {}", path.display(), summary(&a));
        }
        Mode::Cv => {
            let folds = make_folds(&manifest, &cfg.split)?;
            for r in 0..folds.len() {
                let a = cv_rotation(&folds, r)?;
                let path = out.join(format!("manifest_rotation{}.jsonl", r + 1));
                rebase(a.tag(&manifest)).save(&path)?;
                println!("{}: {}", path.display(), summary(&a));
            }
        }
    }
    Ok(())
}

fn print_report(paths: &[PathBuf]) -> Result<()> {
    if let Some(txt) = paths.iter().find(|p| p.extension().is_some_and(|e| e == "txt")) {
        print!("{}", std::fs::read_to_string(txt)?);
    }
    for p in paths {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn train<T: Scalar>(cfg: &ExperimentConfig, out: &Path, manifest_path: &Path) -> Result<()> {
    let dataset = Dataset::load(Manifest::load(manifest_path)?)?;
    let assignment = assignment_for(&dataset.manifest, cfg)?;
    let result = run_experiment::<T>(&dataset, &assignment, cfg)?;
    let written = write_holdout_reports(out, &result)?;
    let model_path = out.join("model.tcnw");
    result.outcome.classifier.save(&model_path)?;
    print_report(&written)?;
    println!("model saved to {}", model_path.display());
    Ok(())
}

fn cv<T: Scalar>(cfg: &ExperimentConfig, out: &Path, manifest_path: &Path) -> Result<()> {
    let dataset = Dataset::load(Manifest::load(manifest_path)?)?;
    let result = run_cv::<T>(&dataset, cfg)?;
    let written = write_cv_reports(out, &result)?;
    print_report(&written)
}

fn eval<T: Scalar>(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest_path: &Path,
    model_path: &Path,
    subset: Option<SubsetArg>,
    aggregation: AggregationArg,
) -> Result<()> {
    let mut manifest = Manifest::load(manifest_path)?;
    let wanted = subset.map(|s| match s {
        SubsetArg::Train => Subset::Train,
        SubsetArg::Validation => Subset::Validation,
        SubsetArg::Test => Subset::Test,
    });
    if let Some(s) = wanted {
        manifest.records.retain(|r| r.split == Some(s));
        if manifest.is_empty() {
            bail!("no records tagged `{s}` in {}", manifest_path.display());
        }
    }
    let classifier = Classifier::<T>::load(model_path)?;
    let dataset = Dataset::load(manifest)?;
    let eval = evaluate_subset(
        &classifier,
        wanted.unwrap_or(Subset::Test),
        &dataset.patches,
        cfg.train.eval_batch_size,
    )?;
    let agg = match aggregation {
        AggregationArg::Patch => Aggregation::Patch,
        AggregationArg::Image => Aggregation::Image,
    };
    let m = eval.at(agg);
    println!("accuracy {:.4} over {} {}s", m.accuracy, m.confusion.total(), match agg {
        Aggregation::Patch => "patch",
        Aggregation::Image => "image",
    });
    if let (Some(loss), Some(mse)) = (m.loss, m.mse) {
        println!("loss {loss:.4}  mse {mse:.4}");
    }
    print!("{}", m.confusion.to_csv());
    for c in 0..m.confusion.classes() {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{}: precision {}  recall {}",
            Label::from_index(c).map_or_else(|| c.to_string(), |l| l.to_string()),
            fmt(m.confusion.precision(c)),
            fmt(m.confusion.recall(c))
        );
    }
    create_dir(out)?;
    let path = out.join("eval_confusion.csv");
    std::fs::write(&path, m.confusion.to_csv())?;
    Ok(())
}

fn infer<T: Scalar>(cfg: &ExperimentConfig, inputs: &[PathBuf], model_path: &Path) -> Result<()> {
    let classifier = Classifier::<T>::load(model_path)?;
    let k = classifier.classes();
    let window = cfg.pipeline.window;
    let name = |c: usize| Label::from_index(c).map_or_else(|| c.to_string(), |l| l.to_string());
    println!("input,label,{}", (0..k).map(|c| format!("p_{}", name(c))).collect::<Vec<_>>().join(","));
    for input in inputs {
        let img = GrayImage::load(input)?;
        let is_strip = img.height() == window && img.width() > window;
        let patches = if is_strip {
            slice_patches(&img, window, cfg.pipeline.overlap)?.patches
        } else {
            vec![img]
        };
        let probs = classifier.probabilities(&patches)?;
        let predicted: Vec<usize> = probs
            .chunks(k)
            .map(|row| {
                (0..k).fold(0, |best, c| if row[c] > row[best] { c } else { best })
            })
            .collect();
        let label = majority_vote(&predicted, k);
        let mean: Vec<String> = (0..k)
            .map(|c| {
                let m = probs.chunks(k).map(|row| row[c]).sum::<f64>() / patches.len() as f64;
                format!("{m:.4}")
            })
            .collect();
        println!("{},{},{}", input.display(), name(label), mean.join(","));
    }
    Ok(())
}

fn features(cfg: &ExperimentConfig, out: &Path, manifest_path: &Path, output: Option<&Path>) -> Result<()> {
    let dataset = Dataset::load(Manifest::load(manifest_path)?)?;
    let feats = extract_all(&dataset.patches, &cfg.baseline)?;
    let rows: Vec<_> = feats
        .into_iter()
        .zip(&dataset.manifest.records)
        .map(|(f, r)| (f, r.label.to_string()))
        .collect();
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            create_dir(out)?;
            out.join("features.csv")
        }
    };
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_features_csv(std::io::BufWriter::new(file), &rows)?;
    println!("{} feature rows written to {}", rows.len(), path.display());
    Ok(())
}

fn baseline(cfg: &ExperimentConfig, out: &Path, manifest_path: &Path) -> Result<()> {
    let dataset = Dataset::load(Manifest::load(manifest_path)?)?;
    let assignment = assignment_for(&dataset.manifest, cfg)?;
    let result = run_baseline(&dataset, &assignment, &cfg.baseline, cfg.arch.classes)?;
    let written = write_baseline_reports(out, &result)?;
    print_report(&written)
}

fn activations<T: Scalar>(
    cfg: &ExperimentConfig,
    out: &Path,
    input: &Path,
    model_path: Option<&Path>,
    layer: LayerArg,
) -> Result<()> {
    let classifier = match model_path {
        Some(p) => Classifier::<T>::load(p)?,
        None => {
            log::warn!("no --model given; using freshly initialized weights");
            Classifier {
                model: Model::<T>::build(cfg.arch.clone(), derive_seed(cfg.train.seed, &[1]))?,
                preprocessor: Preprocessor {
                    input_size: cfg.arch.input_size,
                    standardizer: Standardizer::IDENTITY,
                },
            }
        }
    };
    let img = GrayImage::load(input)?;
    let prepared = classifier.preprocessor.prepare(&img, None)?;
    let x = to_tensor::<T>(&[prepared], Some(&classifier.preprocessor.standardizer))?;
    let (selector, name) = match layer {
        LayerArg::Conv1 => (LayerSelector::Conv1, "conv1"),
        LayerArg::Conv2 => (LayerSelector::Conv2, "conv2"),
    };
    let maps = export_activations(&classifier.model, &x, selector)?;
    create_dir(out)?;
    for (i, m) in maps.iter().enumerate() {
        m.save(out.join(format!("{name}_{i:02}.png")))?;
    }
    let (w, h) = maps.first().map_or((0, 0), |m| (m.width(), m.height()));
    println!("{} {name} maps of {w}x{h} written to {}", maps.len(), out.display());
    Ok(())
}

fn params(cfg: &ExperimentConfig) {
    let table = cfg.arch.layer_table();
    println!("{:<8}{:>18}{:>8}{:>10}", "layer", "weights", "bias", "params");
    for l in &table {
        let shape = l
            .weight_shape
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("x");
        println!("{:<8}{shape:>18}{:>8}{:>10}", l.layer, l.bias_len, l.count());
    }
    println!("{:<8}{:>36}", "total", cfg.arch.param_count());
}
