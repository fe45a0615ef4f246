//! End-to-end runs of the binary on a miniature corpus.

use std::path::Path;
use std::process::{Command, Output};

fn tcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcnn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn tcnn")
}

fn ok(args: &[&str]) -> String {
    let out = tcnn(args);
    assert!(
        out.status.success(),
        "tcnn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MINI: [&str; 12] = [
    "--set",
    "synth.images_per_class=3",
    "--set",
    "synth.width=64",
    "--set",
    "synth.height=16",
    "--set",
    "pipeline.window=16",
    "--set",
    "arch.input_size=32",
    "--set",
    "baseline.lpq.window=5",
];

fn mini(extra: &[&str]) -> Vec<String> {
    MINI.iter().chain(extra).map(|a| a.to_string()).collect()
}

fn run(args: Vec<String>) -> String {
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn params_table_totals_default_architecture() {
    let out = ok(&["params"]);
    let total = out.lines().last().unwrap();
    assert_eq!(total.split_whitespace().collect::<Vec<_>>(), ["total", "43267"]);
}

#[test]
fn synth_split_train_eval_infer() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let runs = dir.path().join("runs");

    run(mini(&["--out-dir", s(&data), "synth"]));
    let manifest = data.join("manifest.jsonl");
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 9 * 7);

    run(mini(&[
        "--out-dir",
        s(&runs),
        "--set",
        "train.max_epochs=1",
        "train",
        s(&manifest),
    ]));
    for name in ["report.csv", "report.txt", "history.csv", "model.tcnw", "model.json"] {
        assert!(runs.join(name).exists(), "{name} missing");
    }

    run(mini(&["--out-dir", s(&data), "split", s(&manifest)]));
    let tagged = data.join("manifest_holdout.jsonl");
    let model = runs.join("model.tcnw");
    let eval = run(mini(&[
        "--out-dir",
        s(&runs),
        "eval",
        s(&tagged),
        "--model",
        s(&model),
        "--subset",
        "test",
    ]));
    assert!(eval.contains("truth\\predicted,ND,MC,AC"), "{eval}");

    let strip = data.join("images/nd_000.png");
    let infer = run(mini(&["infer", s(&strip), "--model", s(&model)]));
    let mut lines = infer.lines();
    assert_eq!(lines.next(), Some("input,label,p_ND,p_MC,p_AC"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    let total: f64 = row[2..].iter().map(|p| p.parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-3);
}

#[test]
fn features_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run(mini(&["--out-dir", s(&data), "synth"]));
    let manifest = data.join("manifest.jsonl");
    run(mini(&["--out-dir", s(&data), "features", s(&manifest)]));
    let csv = std::fs::read_to_string(data.join("features.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 269 + 1);
    assert_eq!(csv.lines().count(), 1 + 63);

    run(mini(&["--out-dir", s(&data), "baseline-train", s(&manifest)]));
    assert!(data.join("baseline_report.csv").exists());
}

#[test]
fn invalid_override_is_reported() {
    let out = tcnn(&["--set", "train.batch_size=0", "params"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
