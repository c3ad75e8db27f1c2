//! Kernel and model throughput on the global rayon pool versus a
//! single-thread pool. Build with `--no-default-features` to time the
//! sequential fallback without rayon at all.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wstatt_core::model::{Mode, Model, ModelConfig};
use wstatt_core::nn::{bilstm, conv2d, LstmParams};
use wstatt_core::rng::SplitMix64;
use wstatt_core::Tensor;

fn randn(shape: &[usize], rng: &mut SplitMix64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.normal()).collect()).unwrap()
}

#[cfg(feature = "parallel")]
fn pools() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("global", None), ("single", Some(single))]
}

#[cfg(not(feature = "parallel"))]
fn pools() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn run_in<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_in<R: Send>(_: &Option<()>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn bench_conv(c: &mut Criterion) {
    let mut rng = SplitMix64::new(1);
    let x = randn(&[24, 16, 32, 32], &mut rng);
    let w = randn(&[32, 16, 3, 3], &mut rng);
    let b = randn(&[32], &mut rng);
    let mut group = c.benchmark_group("conv2d_24x16x32x32_s2");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| run_in(&pool, || conv2d(&x, &w, Some(&b), 2, 1).unwrap()))
        });
    }
    group.finish();
}

fn bench_bilstm(c: &mut Criterion) {
    let mut rng = SplitMix64::new(2);
    let seq = randn(&[24, 64, 32], &mut rng);
    let mut params = || {
        let mut p = LstmParams::zeros(32, 32);
        for t in p.wz.iter_mut().chain(p.wh.iter_mut()) {
            *t = randn(t.shape(), &mut rng).map(|v| 0.1 * v);
        }
        p
    };
    let (fwd, bwd) = (params(), params());
    let mut group = c.benchmark_group("bilstm_24x64x32");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| run_in(&pool, || bilstm(&seq, &fwd, &bwd).unwrap()))
        });
    }
    group.finish();
}

fn bench_model(c: &mut Criterion) {
    let cfg = ModelConfig {
        conv_widths: vec![16, 32],
        lstm_hidden: 32,
        weather_hidden: 16,
        patch_px: 16,
        ..ModelConfig::new(10, 7, 6, Mode::Wstatt)
    };
    let model = Model::new(cfg, 0).unwrap();
    let mut rng = SplitMix64::new(3);
    let sat = randn(&[24, 10, 16, 16], &mut rng);
    let wx = randn(&[365, 7], &mut rng);
    let targets: Vec<u16> = (0..256).map(|_| rng.below(6) as u16).collect();
    let mask = vec![true; 256];
    let mut group = c.benchmark_group("wstatt_patch16");
    group.sample_size(20);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("forward", name), |bench| {
            bench.iter(|| run_in(&pool, || model.forward(&sat, Some(&wx)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("loss_and_grads", name), |bench| {
            bench.iter(|| run_in(&pool, || model.loss_and_grads(&sat, Some(&wx), &targets, &mask).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_conv, bench_bilstm, bench_model);
criterion_main!(benches);
