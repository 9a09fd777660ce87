//! Benchmarks for the hot pipeline kernels: the mutual-information
//! estimator, greedy feature selection, trace fusion and network training.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvqx_bench::{drive_trace, fuse_trace, gaussian_clouds};
use cvqx_core::mlkit::{build_dataset, md_select, mutual_information, train, TrainParams, FEATURE_NAMES};

fn bench_mutual_information(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 10_000;
    let col_a: Vec<u32> = (0..n).map(|_| rng.gen_range(0..10)).collect();
    let col_b: Vec<u32> = col_a
        .iter()
        .map(|&v| if rng.gen_bool(0.7) { v } else { rng.gen_range(0..10) })
        .collect();
    let y: Vec<usize> = col_a.iter().map(|&v| usize::from(v >= 5)).collect();

    c.bench_function("mutual_information/2cols_10k_rows", |b| {
        b.iter(|| {
            mutual_information(black_box(&[&col_a, &col_b]), black_box(&y)).unwrap()
        })
    });
}

fn bench_fuse(c: &mut Criterion) {
    let bundle = drive_trace(11);
    c.bench_function("fuse/2min_trace", |b| {
        b.iter(|| fuse_trace(black_box(&bundle)))
    });
}

fn bench_md_select(c: &mut Criterion) {
    let bundle = drive_trace(11);
    let fused = fuse_trace(&bundle);
    let (ds, _) =
        build_dataset(&fused, "binary50".parse().unwrap(), &FEATURE_NAMES, 20).unwrap();
    c.bench_function("md_select/4_of_8_features_10_bins", |b| {
        b.iter(|| md_select(black_box(&ds), 4, 10).unwrap())
    });
}

fn bench_train(c: &mut Criterion) {
    let ds = gaussian_clouds(1_000, 4, 5);
    let params = TrainParams {
        hidden: 32,
        epochs: 1,
        batch_size: 256,
        ..TrainParams::default()
    };
    c.bench_function("train/1_epoch_2k_rows_hidden32", |b| {
        b.iter(|| train(black_box(&ds), black_box(&params)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_mutual_information,
    bench_fuse,
    bench_md_select,
    bench_train
);
criterion_main!(benches);
