use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mcread_core::system::TWO_PI;
use mcread_core::{
    evolve, EvolveOptions, Frame, InitialState, PulseSchedule, Qubit, SystemParams, C64,
};

fn evolve_dispersive(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_20ns");
    group.sample_size(10);
    let drive = (C64::new(TWO_PI * 30e6, 0.0), C64::new(0.0, TWO_PI * 2e6));
    for (levels, nf, frame) in [
        (2, 12, Frame::Dispersive),
        (3, 20, Frame::Dispersive),
        (3, 20, Frame::Displaced),
        (3, 10, Frame::Rotating),
    ] {
        let p = SystemParams::reference_sample()
            .with_truncation(levels, nf)
            .unwrap();
        let s = PulseSchedule::constant(20e-9, drive.0, drive.1).unwrap();
        let opts = EvolveOptions {
            check_positivity: false,
            ..EvolveOptions::frame(frame)
        };
        let init = InitialState::Bare(Qubit::Excited);
        group.bench_function(format!("{frame:?}/{levels}x{nf}"), |b| {
            b.iter(|| evolve(black_box(&p), &s, &init, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, evolve_dispersive);
criterion_main!(benches);
