use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tcnn_bench::{noise_image, noise_tensor};
use tcnn_core::baselines::{extract_features, lpq_descriptor, GlcmConfig, LpqConfig};
use tcnn_core::model::{ArchConfig, Model};
use tcnn_core::nn::{conv2d, conv2d_backward, OptimizerConfig, OptimizerState};
use tcnn_core::pipeline::{slice_patches, unfold_log_polar, upscale_bicubic, UnfoldGeometry};

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    let input = noise_tensor::<f32>(&[8, 1, 224, 224], 1);
    let kernels = noise_tensor::<f32>(&[32, 1, 11, 11], 2);
    let bias = noise_tensor::<f32>(&[32], 3);
    group.bench_function("conv1_forward_b8", |b| {
        b.iter(|| conv2d(black_box(&input), &kernels, &bias, 3).unwrap())
    });
    let pooled = noise_tensor::<f32>(&[8, 32, 36, 36], 4);
    let kernels2 = noise_tensor::<f32>(&[64, 32, 3, 3], 5);
    let bias2 = noise_tensor::<f32>(&[64], 6);
    group.bench_function("conv2_forward_backward_b8", |b| {
        b.iter(|| {
            let (out, cache) = conv2d(black_box(&pooled), &kernels2, &bias2, 1).unwrap();
            conv2d_backward(cache, &out, true).unwrap()
        })
    });
    group.finish();
}

fn network(c: &mut Criterion) {
    let mut group = c.benchmark_group("model");
    group.sample_size(10);
    let arch = ArchConfig::default();
    let batch = noise_tensor::<f32>(&[32, 1, 224, 224], 7);
    let targets: Vec<usize> = (0..32).map(|i| i % 3).collect();
    let model = Model::<f32>::build(arch, 8).unwrap();
    group.bench_function("forward_b32", |b| {
        b.iter(|| model.forward(black_box(&batch), false).unwrap())
    });
    let optimizer = OptimizerConfig::default();
    group.bench_function("train_step_b32", |b| {
        let mut m = model.clone();
        let mut state = OptimizerState::new(m.params());
        b.iter(|| m.train_step(black_box(&batch), &targets, &mut state, &optimizer).unwrap())
    });
    group.finish();
}

fn preprocessing(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    let frame = noise_image(1024, 768, 9);
    let geom = UnfoldGeometry::centered(1024, 768);
    group.bench_function("unfold_1024x768", |b| {
        b.iter(|| unfold_log_polar(black_box(&frame), &geom).unwrap())
    });
    let strip = noise_image(768, 94, 10);
    group.bench_function("slice_strip", |b| {
        b.iter(|| slice_patches(black_box(&strip), 94, 0.5).unwrap())
    });
    let patch = noise_image(94, 94, 11);
    group.bench_function("bicubic_94_to_224", |b| {
        b.iter(|| upscale_bicubic(black_box(&patch), 224).unwrap())
    });
    group.finish();
}

fn descriptors(c: &mut Criterion) {
    let mut group = c.benchmark_group("baselines");
    let patch = noise_image(94, 94, 12);
    let lpq = LpqConfig::default();
    group.bench_function("lpq_94", |b| {
        b.iter(|| lpq_descriptor(black_box(&patch), &lpq).unwrap())
    });
    let glcm = GlcmConfig::default();
    group.bench_function("lpq_haralick_94", |b| {
        b.iter(|| extract_features(black_box(&patch), &lpq, &glcm).unwrap())
    });
    group.finish();
}

criterion_group!(benches, convolution, network, preprocessing, descriptors);
criterion_main!(benches);
