use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tslab_core::datagen::seeded_dataset;
use tslab_core::gradient::gradients;
use tslab_core::numerics::{gaussian_matrix, svd_default, Rng};
use tslab_core::trainer::{train, InitMode, TrainConfig};
use tslab_core::BlockWeights;

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        eta1: 1.5,
        eta2: 0.015,
        switch_epoch: 20.min(epochs.max(1)),
        lambda: 1e-3,
        tau0: 0.659,
        tau_xi: 0.0,
        epochs,
        seed: 0,
        init_mode: InitMode::NearZero,
    }
}

fn bench_gradient(c: &mut Criterion) {
    let ds = seeded_dataset(0, 10, 7.0, 1e-7, 128, 128).unwrap();
    let mut rng = Rng::new(0, 2);
    let bw = BlockWeights::new(gaussian_matrix(&mut rng, 10, 10, 0.1), gaussian_matrix(&mut rng, 10, 10, 0.1));
    c.bench_function("gradient d=10 L=128 N=128", |b| b.iter(|| gradients(black_box(&bw), &ds)));
}

fn bench_svd(c: &mut Criterion) {
    let m = gaussian_matrix(&mut Rng::new(0, 1), 10, 10, 1.0);
    c.bench_function("svd 10x10", |b| b.iter(|| svd_default(black_box(&m)).unwrap()));
}

fn bench_epochs(c: &mut Criterion) {
    let ds = seeded_dataset(0, 10, 7.0, 1e-7, 128, 128).unwrap();
    let cfg = config(10);
    c.bench_function("train 10 epochs", |b| b.iter(|| train(black_box(&cfg), &ds).unwrap()));
}

criterion_group!(benches, bench_gradient, bench_svd, bench_epochs);
criterion_main!(benches);
