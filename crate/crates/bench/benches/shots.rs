use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mcread_core::shots::{matched_weights, sample_shots};
use mcread_core::{NoiseModel, Qubit, Trajectory, C64};

fn ramp(n: usize, sign: f64) -> Trajectory {
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * 2e-9).collect();
    let alpha = times
        .iter()
        .map(|t| C64::new(sign * t * 1e7, t * 5e6))
        .collect();
    Trajectory::from_amplitudes(times, alpha, None).unwrap()
}

fn shots(c: &mut Criterion) {
    let (g, e) = (ramp(210, -1.0), ramp(210, 1.0));
    let w = matched_weights(&g, &e).unwrap();
    let noise = NoiseModel::calibrated(166.0, 2e-9, 1).unwrap();
    let mut group = c.benchmark_group("sample_shots");
    group.sample_size(20);
    group.bench_function("10k_x_210_samples", |b| {
        b.iter(|| {
            sample_shots(
                [&g, &e],
                Qubit::Excited,
                black_box(&w),
                &noise,
                10_000,
                0.006,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, shots);
criterion_main!(benches);
