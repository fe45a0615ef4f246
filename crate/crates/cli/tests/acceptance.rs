//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.
//!
//! Criteria that name a command drive the real `tcnn` binary; the rest call
//! the library directly.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcnn_core::baselines::{glcm, haralick_features, lpq_descriptor, GlcmConfig, LpqConfig, LPQ_BINS};
use tcnn_core::harness::{read_report_csv, Manifest};
use tcnn_core::model::{load_weights, save_weights, ArchConfig, Model};
use tcnn_core::nn::{
    concat, concat_backward, conv2d, conv2d_backward, dense, dense_backward, energy_pool,
    energy_pool_backward, global_max_pool, global_max_pool_backward, grad_check, maxpool2d,
    maxpool2d_backward, relative_error, relu, relu_backward, softmax_xent,
};
use tcnn_core::pipeline::{slice_patches, GrayImage};
use tcnn_core::{Error, Tensor};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

/// Epoch budget of the end-to-end run.
const HOLDOUT_EPOCHS: usize = 30;
const HOLDOUT_TARGET: f64 = 0.95;
const HOLDOUT_TIME_LIMIT: Duration = Duration::from_secs(15 * 60);
/// Images per class of the corpus used for the cross-validation layout and
/// determinism runs.
const SMALL_CORPUS_PER_CLASS: usize = 4;
const SMALL_CORPUS_EPOCHS: usize = 2;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn tcnn(args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_tcnn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("spawning tcnn: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "tcnn {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn report_value(path: &Path, split: &str, stage: &str) -> Result<f64, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let rows = read_report_csv(&text).map_err(|e| e.to_string())?;
    rows.iter()
        .find(|r| r.0 == split && r.1 == stage)
        .map(|r| r.2)
        .ok_or_else(|| format!("{}: no row {split},{stage}", path.display()))
}

fn parse_thousands(s: &str) -> Option<usize> {
    s.replace(',', "").parse().ok()
}

// 1 -------------------------------------------------------------------------

fn parameter_identity() -> Outcome {
    let start = Instant::now();
    let stdout = tcnn(&["params"])?;
    let elapsed = start.elapsed();
    let expected = [
        ("conv1", 3904),
        ("conv2", 18496),
        ("dense1", 12416),
        ("dense2", 8256),
        ("output", 195),
        ("total", 43267),
    ];
    for (layer, count) in expected {
        let line = stdout
            .lines()
            .find(|l| l.split_whitespace().next() == Some(layer))
            .ok_or_else(|| format!("no `{layer}` row in:\n{stdout}"))?;
        let got = line.split_whitespace().last().and_then(parse_thousands);
        ensure(got == Some(count), format!("{layer}: expected {count}, row `{line}`"))?;
    }
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("3904/18496/12416/8256/195 = 43267 in {elapsed:.2?}"))
}

// 2 -------------------------------------------------------------------------

fn shape_identity() -> Outcome {
    let start = Instant::now();
    let arch = ArchConfig::default();
    let model = Model::<f32>::build(arch.clone(), 0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = arch.input_size;
    ensure(s == 224, format!("default input is {s}"))?;
    let x = Tensor::from_vec(&[1, 1, s, s], (0..s * s).map(|_| rng.random::<f32>()).collect())
        .map_err(|e| e.to_string())?;
    let (logits, acts) = model.forward(&x, true).map_err(|e| e.to_string())?;
    let acts = acts.ok_or("no activations captured")?;
    let elapsed = start.elapsed();
    ensure(acts.conv1.shape() == [1, 32, 72, 72], format!("conv1 {:?}", acts.conv1.shape()))?;
    ensure(acts.conv2.shape() == [1, 64, 34, 34], format!("conv2 {:?}", acts.conv2.shape()))?;
    ensure(logits.shape() == [1, 3], format!("logits {:?}", logits.shape()))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("conv1 72x72, conv2 34x34 in {elapsed:.2?}"))
}

// 3 -------------------------------------------------------------------------

fn slicing_counts(corpus: &Path) -> Outcome {
    let strip = GrayImage::from_fn(768, 94, |x, y| ((x * 7 + y * 3) % 17) as f32 / 16.0);
    let set = slice_patches(&strip, 94, 0.5).map_err(|e| e.to_string())?;
    ensure(set.patches.len() == 15, format!("{} patches", set.patches.len()))?;

    tcnn(&["--out-dir", &path_arg(corpus), "synth"])?;
    let manifest =
        Manifest::load(corpus.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    let sources = manifest.sources().len();
    ensure(sources == 150, format!("{sources} source images"))?;
    ensure(manifest.len() == 2250, format!("{} manifest records", manifest.len()))?;
    Ok(format!("15 patches per strip, {sources} images -> {} records", manifest.len()))
}

// 4 -------------------------------------------------------------------------

const EPS: f64 = 1e-6;
const LAYER_TOL: f64 = 1e-4;
const END_TO_END_TOL: f64 = 1e-3;
const INSTANCES: u64 = 20;

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape, data.to_vec()).unwrap()
}

/// Magnitudes bounded away from zero keep rectifier kinks out of reach of the
/// finite-difference step.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect()
}

/// Distinct grid values so that pooling maxima are well separated.
fn distinct(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 0.3).collect();
    v.shuffle(rng);
    v
}

fn worst_over_instances(salt: u64, check: impl Fn(&mut ChaCha8Rng, u64) -> f64) -> f64 {
    (0..INSTANCES)
        .map(|seed| check(&mut ChaCha8Rng::seed_from_u64(salt + seed), seed))
        .fold(0.0, f64::max)
}

fn layer_errors() -> Vec<(&'static str, f64)> {
    let conv = worst_over_instances(0, |rng, seed| {
        let n = rng.random_range(1..=2);
        let cin = rng.random_range(1..=3);
        let cout = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let stride = rng.random_range(1..=2);
        let h = rng.random_range(k..k + 5);
        let w = rng.random_range(k..k + 5);
        let (ni, nk) = (n * cin * h * w, cout * cin * k * k);
        let point = away_from_zero(rng, ni + nk + cout);
        let split = |x: &[f64]| {
            (
                t(&[n, cin, h, w], &x[..ni]),
                t(&[cout, cin, k, k], &x[ni..ni + nk]),
                t(&[cout], &x[ni + nk..]),
            )
        };
        grad_check(
            &point,
            EPS,
            seed,
            |x| {
                let (i, kk, b) = split(x);
                conv2d(&i, &kk, &b, stride).unwrap().0.into_data()
            },
            |x, g| {
                let (i, kk, b) = split(x);
                let (out, cache) = conv2d(&i, &kk, &b, stride).unwrap();
                let grads = conv2d_backward(cache, &t(out.shape(), g), true).unwrap();
                let mut v = grads.input.unwrap().into_data();
                v.extend(grads.kernels.into_data());
                v.extend(grads.bias.into_data());
                v
            },
        )
    });

    let dense_err = worst_over_instances(100, |rng, seed| {
        let (n, d, m) = (rng.random_range(1..4), rng.random_range(1..7), rng.random_range(1..5));
        let point = away_from_zero(rng, n * d + d * m + m);
        let split = |x: &[f64]| {
            (
                t(&[n, d], &x[..n * d]),
                t(&[d, m], &x[n * d..n * d + d * m]),
                t(&[m], &x[n * d + d * m..]),
            )
        };
        grad_check(
            &point,
            EPS,
            seed,
            |x| {
                let (i, w, b) = split(x);
                dense(&i, &w, &b).unwrap().0.into_data()
            },
            |x, g| {
                let (i, w, b) = split(x);
                let (_, cache) = dense(&i, &w, &b).unwrap();
                let grads = dense_backward(cache, &t(&[n, m], g)).unwrap();
                let mut v = grads.input.into_data();
                v.extend(grads.weights.into_data());
                v.extend(grads.bias.into_data());
                v
            },
        )
    });

    let relu_err = worst_over_instances(200, |rng, seed| {
        let shape = [rng.random_range(1..3), rng.random_range(1..4), 3, 4];
        let point = away_from_zero(rng, shape.iter().product());
        grad_check(
            &point,
            EPS,
            seed,
            |x| relu(&t(&shape, x)).0.into_data(),
            |x, g| {
                let (_, cache) = relu(&t(&shape, x));
                relu_backward(cache, &t(&shape, g)).unwrap().into_data()
            },
        )
    });

    let pool = worst_over_instances(300, |rng, seed| {
        let (window, stride) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let shape = [
            rng.random_range(1..3),
            rng.random_range(1..3),
            rng.random_range(window..window + 5),
            rng.random_range(window..window + 5),
        ];
        let point = distinct(rng, shape.iter().product());
        grad_check(
            &point,
            EPS,
            seed,
            |x| maxpool2d(&t(&shape, x), window, stride).unwrap().0.into_data(),
            |x, g| {
                let (out, cache) = maxpool2d(&t(&shape, x), window, stride).unwrap();
                maxpool2d_backward(cache, &t(out.shape(), g)).unwrap().into_data()
            },
        )
    });

    let random_maps = |rng: &mut ChaCha8Rng| {
        [
            rng.random_range(1..3),
            rng.random_range(1..4),
            rng.random_range(1..6),
            rng.random_range(1..6),
        ]
    };

    let energy = worst_over_instances(400, |rng, seed| {
        let shape = random_maps(rng);
        let point = away_from_zero(rng, shape.iter().product());
        grad_check(
            &point,
            EPS,
            seed,
            |x| energy_pool(&t(&shape, x)).unwrap().0.into_data(),
            |x, g| {
                let (_, cache) = energy_pool(&t(&shape, x)).unwrap();
                energy_pool_backward(cache, &t(&shape[..2], g)).unwrap().into_data()
            },
        )
    });

    let global_max = worst_over_instances(500, |rng, seed| {
        let shape = random_maps(rng);
        let point = distinct(rng, shape.iter().product());
        grad_check(
            &point,
            EPS,
            seed,
            |x| global_max_pool(&t(&shape, x)).unwrap().0.into_data(),
            |x, g| {
                let (_, cache) = global_max_pool(&t(&shape, x)).unwrap();
                global_max_pool_backward(cache, &t(&shape[..2], g)).unwrap().into_data()
            },
        )
    });

    let concat_err = worst_over_instances(600, |rng, seed| {
        let (n, a, b) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..5));
        let point = away_from_zero(rng, n * (a + b));
        let parts = |x: &[f64]| (t(&[n, a], &x[..n * a]), t(&[n, b], &x[n * a..]));
        grad_check(
            &point,
            EPS,
            seed,
            |x| {
                let (p, q) = parts(x);
                concat(&[&p, &q]).unwrap().0.into_data()
            },
            |x, g| {
                let (p, q) = parts(x);
                let (_, cache) = concat(&[&p, &q]).unwrap();
                concat_backward(cache, &t(&[n, a + b], g))
                    .unwrap()
                    .into_iter()
                    .flat_map(Tensor::into_data)
                    .collect()
            },
        )
    });

    let xent = worst_over_instances(700, |rng, seed| {
        let (n, k) = (rng.random_range(1..5), rng.random_range(2..5));
        let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let point: Vec<f64> = (0..n * k).map(|_| rng.random_range(-3.0..3.0)).collect();
        grad_check(
            &point,
            EPS,
            seed,
            |x| vec![softmax_xent(&t(&[n, k], x), &targets).unwrap().loss],
            |x, g| {
                let sx = softmax_xent(&t(&[n, k], x), &targets).unwrap();
                sx.grad_logits.data().iter().map(|v| v * g[0]).collect()
            },
        )
    });

    vec![
        ("conv", conv),
        ("dense", dense_err),
        ("relu", relu_err),
        ("maxpool", pool),
        ("energy", energy),
        ("globalmax", global_max),
        ("concat", concat_err),
        ("softmax-xent", xent),
    ]
}

/// Twenty parameters spread across every record of the default network.
fn end_to_end_error() -> f64 {
    let arch = ArchConfig::default();
    let model = Model::<f64>::build(arch.clone(), 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (n, s) = (2, arch.input_size);
    let x = Tensor::from_vec(
        &[n, 1, s, s],
        (0..n * s * s).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let targets = [0, 2];
    let analytic = model.gradients(&x, &targets).unwrap();
    let records = model.params().len();
    let eps = 1e-5;
    (0..20)
        .map(|i| {
            let r = i % records;
            let idx = rng.random_range(0..model.params()[r].len());
            let loss_at = |delta: f64| {
                let mut m = model.clone();
                m.params_mut()[r].data_mut()[idx] += delta;
                m.gradients(&x, &targets).unwrap().loss
            };
            let numeric = (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
            relative_error(analytic.grads[r].data()[idx], numeric)
        })
        .fold(0.0, f64::max)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let layers = layer_errors();
    let e2e = end_to_end_error();
    let elapsed = start.elapsed();
    let summary = layers
        .iter()
        .map(|(name, err)| format!("{name} {err:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    for (name, err) in &layers {
        ensure(*err < LAYER_TOL, format!("{name}: relative error {err:.2e}"))?;
    }
    ensure(e2e < END_TO_END_TOL, format!("end-to-end relative error {e2e:.2e}"))?;
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!("{summary}; end-to-end {e2e:.1e}; {elapsed:.1?}"))
}

// 5 -------------------------------------------------------------------------

const ENERGY_CASES: u64 = 128;

/// Values on a 1/64 grid: every partial sum is exact, so summation order
/// cannot perturb the result.
fn dyadic(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo..=hi)) / 64.0
}

fn energy_properties() -> Outcome {
    for case in 0..ENERGY_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + case);
        let shape = [
            rng.random_range(1..3),
            rng.random_range(1..5),
            rng.random_range(1..9),
            rng.random_range(1..9),
        ];
        let [n, c, h, w] = shape;
        let data: Vec<f64> = (0..n * c * h * w).map(|_| dyadic(&mut rng, -64, 64)).collect();
        let x = Tensor::from_vec(&shape, data.clone()).map_err(|e| e.to_string())?;
        let (e, _) = energy_pool(&x).map_err(|e| e.to_string())?;

        let mut permuted = data;
        for plane in permuted.chunks_mut(h * w) {
            plane.shuffle(&mut rng);
        }
        let (ep, _) = energy_pool(&t(&shape, &permuted)).map_err(|e| e.to_string())?;
        ensure(e.data() == ep.data(), format!("case {case}: permutation changed the energy"))?;

        let value = dyadic(&mut rng, 0, 64);
        let (ec, _) = energy_pool(&Tensor::full(&shape, value)).map_err(|e| e.to_string())?;
        ensure(
            ec.data().iter().all(|&v| v == value),
            format!("case {case}: constant map {value} not reproduced"),
        )?;

        let negative: Vec<f64> = (0..n * c * h * w).map(|_| dyadic(&mut rng, -64, 0)).collect();
        let (en, _) = energy_pool(&t(&shape, &negative)).map_err(|e| e.to_string())?;
        ensure(
            en.data().iter().all(|&v| v == 0.0),
            format!("case {case}: non-positive map has non-zero energy"),
        )?;
    }
    Ok(format!("{ENERGY_CASES} randomized cases, exact equality"))
}

// 6 -------------------------------------------------------------------------

fn serialization(dir: &Path) -> Outcome {
    let arch = ArchConfig::default();
    let model = Model::<f32>::build(arch.clone(), 6).map_err(|e| e.to_string())?;
    let (a, b) = (dir.join("a.tcnw"), dir.join("b.tcnw"));
    save_weights(&model, &a).map_err(|e| e.to_string())?;
    let loaded = load_weights(&a, &arch).map_err(|e| e.to_string())?;
    save_weights(&loaded, &b).map_err(|e| e.to_string())?;
    let (first, second) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    ensure(first == second, "re-saved weights differ")?;
    ensure(loaded.params() == model.params(), "loaded parameters differ")?;

    let bad = dir.join("bad.tcnw");
    let mut corruptions: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut flipped = first.clone();
    flipped[first.len() / 2] ^= 0x10;
    corruptions.push(("bit flip", flipped));
    corruptions.push(("truncation", first[..first.len() - 7].to_vec()));
    let mut magic = first.clone();
    magic[0] = b'X';
    corruptions.push(("bad magic", magic));
    corruptions.push(("empty file", Vec::new()));
    for (what, bytes) in &corruptions {
        fs::write(&bad, bytes).unwrap();
        match load_weights(&bad, &arch) {
            Err(Error::WeightsFormat(_)) => {}
            Err(other) => return Err(format!("{what}: unexpected error kind: {other}")),
            Ok(_) => return Err(format!("{what}: corrupted file accepted")),
        }
    }
    Ok(format!(
        "{} bytes re-saved identically; {} corruptions rejected",
        first.len(),
        corruptions.len()
    ))
}

// 7 -------------------------------------------------------------------------

fn synth_small_corpus(dir: &Path) -> Result<PathBuf, String> {
    let manifest = dir.join("manifest.jsonl");
    if !manifest.exists() {
        tcnn(&[
            "--out-dir",
            &path_arg(dir),
            "--set",
            &format!("synth.images_per_class={SMALL_CORPUS_PER_CLASS}"),
            "synth",
        ])?;
    }
    Ok(manifest)
}

fn run_small_cv(corpus: &Path, out: &Path) -> Result<(), String> {
    let manifest = synth_small_corpus(corpus)?;
    tcnn(&[
        "--threads",
        "1",
        "--seed",
        "7",
        "--out-dir",
        &path_arg(out),
        "--set",
        &format!("train.max_epochs={SMALL_CORPUS_EPOCHS}"),
        "cv",
        &path_arg(&manifest),
    ])?;
    Ok(())
}

/// Three numbered fold rows under the table header, then the mean ± std line,
/// for both aggregation levels.
fn check_cv_layout(out: &Path) -> Result<(), String> {
    let text = fs::read_to_string(out.join("report.txt")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    let headers: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            l.split_whitespace().collect::<Vec<_>>()
                == ["Fold", "Images", "(%)", "Training", "Validation", "Test"]
        })
        .map(|(i, _)| i)
        .collect();
    ensure(headers.len() == 2, format!("{} fold tables in report.txt", headers.len()))?;
    for &h in &headers {
        for k in 1..=3 {
            let row: Vec<&str> = lines.get(h + k).unwrap_or(&"").split_whitespace().collect();
            ensure(
                row.len() == 5 && row[0] == k.to_string(),
                format!("fold row {k}: `{}`", lines.get(h + k).unwrap_or(&"")),
            )?;
        }
        let summary = lines.get(h + 4).unwrap_or(&"");
        ensure(
            summary.starts_with("Test accuracy: ") && summary.ends_with("(mean ± std)"),
            format!("summary line `{summary}`"),
        )?;
    }
    let csv = out.join("report.csv");
    for split in ["fold1", "fold2", "fold3", "mean", "std"] {
        report_value(&csv, split, "test")?;
    }
    Ok(())
}

fn end_to_end(corpus: &Path, holdout: &Path, small: &Path, cv_out: &Path) -> Outcome {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let start = Instant::now();
    tcnn(&[
        "--out-dir",
        &path_arg(holdout),
        "--set",
        &format!("train.max_epochs={HOLDOUT_EPOCHS}"),
        "train",
        &path_arg(&corpus.join("manifest.jsonl")),
    ])?;
    let elapsed = start.elapsed();
    let acc = report_value(&holdout.join("report.csv"), "holdout", "test")?;
    let timing = format!("{:.1} min on {threads} thread(s)", elapsed.as_secs_f64() / 60.0);
    ensure(
        acc >= HOLDOUT_TARGET,
        format!("hold-out test accuracy {:.2}% < 95% ({timing})", 100.0 * acc),
    )?;
    ensure(
        elapsed < HOLDOUT_TIME_LIMIT,
        format!("hold-out accuracy {:.2}% but training took {timing}", 100.0 * acc),
    )?;

    run_small_cv(small, cv_out)?;
    check_cv_layout(cv_out)?;
    Ok(format!(
        "hold-out test accuracy {:.2}% in {timing}; CV report has 3 fold rows + mean ± std",
        100.0 * acc
    ))
}

// 8 -------------------------------------------------------------------------

fn textured(seed: u64, size: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Integer gray levels keep a later offset exactly representable.
    let data = (0..size * size)
        .map(|_| f32::from(rng.random_range(40u8..200)) / 255.0)
        .collect();
    GrayImage::new(size, size, data).unwrap()
}

fn baseline_sanity(corpus: &Path, holdout: &Path) -> Outcome {
    let lpq = LpqConfig::default();
    for seed in 0..10 {
        let img = textured(800 + seed, 48);
        let h = lpq_descriptor(&img, &lpq).map_err(|e| e.to_string())?;
        ensure(h.len() == LPQ_BINS && LPQ_BINS == 256, format!("{} LPQ bins", h.len()))?;
        let sum: f64 = h.iter().sum();
        ensure((sum - 1.0).abs() < 1e-12, format!("LPQ histogram sums to {sum}"))?;
        let shifted = GrayImage::new(
            48,
            48,
            img.data().iter().map(|&v| v + 30.0 / 255.0).collect(),
        )
        .unwrap();
        let hs = lpq_descriptor(&shifted, &lpq).map_err(|e| e.to_string())?;
        ensure(h == hs, format!("image {seed}: LPQ changed under a gray-level offset"))?;
    }

    let flat = GrayImage::filled(40, 40, 0.4);
    let m = glcm(&flat, &GlcmConfig::default()).map_err(|e| e.to_string())?;
    let f = haralick_features(&m);
    let (asm, contrast, entropy) = (f[0], f[1], f[8]);
    ensure(
        asm == 1.0 && contrast == 0.0 && entropy == 0.0,
        format!("constant image: ASM {asm}, contrast {contrast}, entropy {entropy}"),
    )?;

    tcnn(&[
        "--out-dir",
        &path_arg(holdout),
        "baseline-train",
        &path_arg(&corpus.join("manifest.jsonl")),
    ])?;
    let base = report_value(&holdout.join("baseline_report.csv"), "baseline", "test")?;
    let tcnn_acc = report_value(&holdout.join("report.csv"), "holdout", "test")?;
    let gap = 100.0 * (tcnn_acc - base);
    let summary = format!(
        "LPQ+HD {:.2}% vs TCNN {:.2}% on the same hold-out split",
        100.0 * base,
        100.0 * tcnn_acc
    );
    ensure(base >= 0.80, format!("{summary}: baseline below 80%"))?;
    ensure(gap.abs() <= 10.0, format!("{summary}: gap {gap:.2} points"))?;
    ensure(gap >= 0.0, format!("{summary}: baseline ahead of the TCNN"))?;
    Ok(format!("256-bin unit-sum offset-invariant LPQ; flat Haralick exact; {summary}"))
}

// 9 -------------------------------------------------------------------------

fn determinism(small: &Path, first: &Path, second: &Path) -> Outcome {
    if !first.join("report.csv").exists() {
        run_small_cv(small, first)?;
    }
    run_small_cv(small, second)?;
    let mut names: Vec<String> = fs::read_dir(first)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    ensure(!names.is_empty(), "first run wrote no reports")?;
    for name in &names {
        let a = fs::read(first.join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(second.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(a == b, format!("{name} differs between runs"))?;
    }
    let count = fs::read_dir(second).map_err(|e| e.to_string())?.count();
    ensure(count == names.len(), format!("{count} vs {} report files", names.len()))?;
    Ok(format!("{} report files byte-identical across two runs", names.len()))
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => Err(payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let dir = |name: &str| work.path().join(name);
    let (corpus, holdout) = (dir("corpus"), dir("holdout"));
    let (small, cv1, cv2) = (dir("small"), dir("cv1"), dir("cv2"));
    fs::create_dir_all(dir("weights")).unwrap();

    let criteria: Vec<Criterion> = vec![
        ("parameter identity", Box::new(parameter_identity)),
        ("shape identity", Box::new(shape_identity)),
        ("slicing counts", Box::new(|| slicing_counts(&corpus))),
        ("gradient suite", Box::new(gradient_suite)),
        ("energy-layer properties", Box::new(energy_properties)),
        ("serialization", Box::new(|| serialization(&dir("weights")))),
        ("desk-scale end-to-end", Box::new(|| end_to_end(&corpus, &holdout, &small, &cv1))),
        ("baseline sanity", Box::new(|| baseline_sanity(&corpus, &holdout))),
        ("determinism", Box::new(|| determinism(&small, &cv1, &cv2))),
    ];

    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = guarded(check);
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{took:.1?}]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name}: {detail} [{took:.1?}]", i + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
