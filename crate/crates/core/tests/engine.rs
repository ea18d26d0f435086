use mcread_core::analytic::{analytic_trajectory, AnalyticParams};
use mcread_core::engine::max_stable_dt;
use mcread_core::system::{dispersive_constants, TWO_PI};
use mcread_core::{
    evolve, EvolveOptions, Frame, InitialState, PulseSchedule, Qubit, Segment, SystemParams, C64,
};
use proptest::prelude::*;

const MHZ: f64 = TWO_PI * 1e6;
const ZERO: C64 = C64::new(0.0, 0.0);

fn two_level(nf: usize) -> SystemParams {
    SystemParams::reference_sample()
        .with_truncation(2, nf)
        .unwrap()
}

#[test]
fn resonator_drive_matches_closed_form() {
    // Without a qubit drive the sectors decouple and the amplitude equation is exact.
    let p = two_level(16);
    let dc = dispersive_constants(&p).unwrap();
    let wr = C64::new(0.0, 1.2 * MHZ);
    let s = PulseSchedule::constant(300e-9, ZERO, wr).unwrap();
    let ap = AnalyticParams::new(wr, ZERO, dc.chi0, p.g, p.kappa()).unwrap();
    for frame in [Frame::Dispersive, Frame::Displaced] {
        for q in [Qubit::Ground, Qubit::Excited] {
            let t = evolve(&p, &s, &InitialState::Bare(q), &EvolveOptions::frame(frame)).unwrap();
            for (ti, a) in t.times.iter().zip(&t.alpha) {
                let want = analytic_trajectory(&ap, q, *ti);
                assert!(
                    (a - want).norm() < 1e-6,
                    "{frame:?} {q} t={ti}: {a} vs {want}"
                );
            }
        }
    }
}

#[test]
fn trace_is_preserved_over_a_microsecond() {
    let p = SystemParams::reference_sample()
        .with_truncation(3, 14)
        .unwrap();
    let s = PulseSchedule::new(
        vec![
            Segment::new(500e-9, C64::new(30.0 * MHZ, 0.0), C64::new(0.0, 1.0 * MHZ)),
            Segment::new(500e-9, ZERO, ZERO),
        ],
        0.0,
    )
    .unwrap();
    let t = evolve(
        &p,
        &s,
        &InitialState::Bare(Qubit::Excited),
        &EvolveOptions::frame(Frame::Dispersive),
    )
    .unwrap();
    assert!(
        t.diagnostics.max_trace_drift <= 1e-6,
        "{}",
        t.diagnostics.max_trace_drift
    );
    assert!(t.diagnostics.max_hermiticity_error <= 1e-10);
    assert!(t.diagnostics.min_eigenvalue.unwrap() > -1e-8);
}

#[test]
fn rk4_error_shrinks_sixteenfold_per_halving() {
    let p = two_level(10);
    let s = PulseSchedule::constant(40e-9, C64::new(25.0 * MHZ, 0.0), C64::new(0.0, 2.0 * MHZ))
        .unwrap();
    let run = |dt: f64| {
        let o = EvolveOptions {
            dt: Some(dt),
            allow_large_dt: true,
            frame: Frame::Dispersive,
            sample_interval: 40e-9,
            ..EvolveOptions::default()
        };
        evolve(&p, &s, &InitialState::Bare(Qubit::Ground), &o)
            .unwrap()
            .final_state
    };
    let limit = max_stable_dt(&p, &s, Frame::Dispersive).unwrap();
    // Start above the stability rule so the truncation error dominates rounding.
    let h = 40e-9 / (40e-9 / (2.0 * limit)).ceil();
    let reference = run(h / 16.0);
    let e1 = run(h).matrix().max_abs_diff(reference.matrix());
    let e2 = run(h / 2.0).matrix().max_abs_diff(reference.matrix());
    assert!(e1 > 1e-12, "error too small to measure: {e1:e}");
    assert!(e1 / e2 >= 12.0, "ratio {} ({e1:e} / {e2:e})", e1 / e2);
}

#[test]
fn sample_grid_is_closed_with_the_end_time() {
    let p = two_level(4);
    let s = PulseSchedule::constant(7e-9, ZERO, ZERO).unwrap();
    let t = evolve(
        &p,
        &s,
        &InitialState::Bare(Qubit::Ground),
        &EvolveOptions::default(),
    )
    .unwrap();
    assert_eq!(t.times.len(), 5);
    assert!((t.times.last().unwrap() - 7e-9).abs() < 1e-18);
}

#[test]
fn full_model_agrees_with_dispersive_model_early_on() {
    let wr = C64::new(0.0, 2.0 * MHZ);
    let s = PulseSchedule::constant(60e-9, ZERO, wr).unwrap();
    let full = SystemParams::reference_sample()
        .with_truncation(4, 12)
        .unwrap();
    let disp = full.with_truncation(3, 12).unwrap();
    let mut opts = EvolveOptions::frame(Frame::Rotating);
    opts.sample_interval = 10e-9;
    let peak = |t: &mcread_core::Trajectory| t.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    for q in [Qubit::Ground, Qubit::Excited] {
        let a = evolve(&full, &s, &InitialState::Dressed(q), &opts).unwrap();
        opts.frame = Frame::Dispersive;
        let b = evolve(&disp, &s, &InitialState::Bare(q), &opts).unwrap();
        opts.frame = Frame::Rotating;
        let scale = peak(&b);
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            assert!((x - y).norm() <= 0.05 * scale, "{q}: {x} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn states_stay_physical(
        qr in -40.0f64..40.0, qi in -40.0f64..40.0,
        rr in -3.0f64..3.0, ri in -3.0f64..3.0,
        excited in any::<bool>(),
    ) {
        let p = SystemParams::reference_sample().with_truncation(3, 10).unwrap();
        let s = PulseSchedule::constant(
            30e-9,
            C64::new(qr, qi) * MHZ,
            C64::new(rr, ri) * MHZ,
        ).unwrap();
        let q = if excited { Qubit::Excited } else { Qubit::Ground };
        let t = evolve(&p, &s, &InitialState::Bare(q), &EvolveOptions::frame(Frame::Dispersive)).unwrap();
        let rho = &t.final_state;
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-8);
        prop_assert!(rho.matrix().hermiticity_error() < 1e-10);
        prop_assert!(rho.min_eigenvalue() > -1e-8);
        let total: f64 = t.populations.iter().map(|p| *p.last().unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-8);
    }
}
