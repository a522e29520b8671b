//! Throughput benchmarks for the hot paths: batched gradient computation,
//! dataset generation, keypoint extraction, and role-AP scoring.
//!
//! Build with the default `parallel` feature to measure the rayon path (the
//! `one_thread` variants pin a single-thread pool for a like-for-like
//! comparison), or with `--no-default-features` to measure the plain
//! sequential fallback.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hokem::evaluation::{
    detections_from_samples, evaluate, ground_truths_from_samples, DetectionSource, Scenario,
};
use hokem::geometry::{extract_object_keypoints, RasterMask};
use hokem::hograph::{build_graph, AdjacencyStack, GraphConfig};
use hokem::network::{Model, ModelConfig};
use hokem::synthetic::{class_names, generate_synthetic_dataset};
use hokem::training::{batch_gradients, HOSample};

fn bench_model(n_classes: usize) -> Model {
    let graph = build_graph(&GraphConfig::default()).unwrap();
    let stack = AdjacencyStack::from_graph(&graph, 0.001).unwrap();
    let config = ModelConfig {
        channels: vec![16, 16, 32],
        num_classes: n_classes,
        ..ModelConfig::default()
    };
    Model::new(config, stack, hokem::features::FEATURE_DIM).unwrap()
}

fn bench_samples(n: usize, n_classes: usize) -> Vec<HOSample> {
    generate_synthetic_dataset(5, n, n_classes)
        .unwrap()
        .to_samples()
        .unwrap()
}

fn gradient_batch(c: &mut Criterion) {
    let model = bench_model(4);
    let samples = bench_samples(16, 4);
    let indices: Vec<usize> = (0..samples.len()).collect();

    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel", |b| {
            b.iter(|| batch_gradients(&model, &samples, black_box(&indices)).unwrap())
        });
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("one_thread", |b| {
            b.iter(|| {
                single.install(|| batch_gradients(&model, &samples, black_box(&indices)).unwrap())
            })
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| batch_gradients(&model, &samples, black_box(&indices)).unwrap())
    });

    group.finish();
}

fn dataset_generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthetic");
    group.sample_size(10);
    group.bench_function("generate_64x4", |b| {
        b.iter(|| generate_synthetic_dataset(black_box(9), 64, 4).unwrap())
    });
    group.finish();
}

fn keypoint_extraction(c: &mut Criterion) {
    // A large disk: every boundary ray has to march across ~100 px.
    let disk = RasterMask::from_fn(220, 220, |i, j| {
        let (dx, dy) = (i as f64 - 110.0, j as f64 - 110.0);
        dx * dx + dy * dy <= 100.0 * 100.0
    })
    .unwrap();
    c.bench_function("extract_keypoints_disk_200", |b| {
        b.iter(|| extract_object_keypoints(black_box(&disk)))
    });
}

fn role_ap(c: &mut Criterion) {
    let model = bench_model(4);
    let samples = bench_samples(500, 4);
    let detections =
        detections_from_samples(&model, &samples, &[DetectionSource::Baseline]).unwrap();
    let ground_truths = ground_truths_from_samples(&samples);
    let names = class_names(4).unwrap();

    let mut group = c.benchmark_group("evaluation");
    group.sample_size(20);
    group.bench_function("role_ap_500", |b| {
        b.iter(|| {
            evaluate(
                black_box(&detections),
                &ground_truths,
                Scenario::One,
                &names,
                DetectionSource::Baseline,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    gradient_batch,
    dataset_generation,
    keypoint_extraction,
    role_ap
);
criterion_main!(benches);
