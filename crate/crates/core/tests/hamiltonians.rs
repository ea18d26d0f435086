use mcread_core::analytic::predicted_chi;
use mcread_core::system::{
    build_dispersive_hamiltonian, build_displaced_hamiltonian, build_rotating_hamiltonian,
    coupling_ladder, dispersive_constants, SystemParams, TWO_PI,
};
use mcread_core::C64;
use proptest::prelude::*;

const MHZ: f64 = TWO_PI * 1e6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_builder_is_hermitian(
        qr in -50.0f64..50.0, qi in -50.0f64..50.0,
        rr in -10.0f64..10.0, ri in -10.0f64..10.0,
        nt in 2usize..5, nf in 2usize..8,
    ) {
        let p = SystemParams::reference_sample().with_truncation(nt, nf).unwrap();
        let q = C64::new(qr, qi) * MHZ;
        let r = C64::new(rr, ri) * MHZ;
        let levels = nt.min(3);
        for h in [
            build_rotating_hamiltonian(&p, q, r).unwrap(),
            build_dispersive_hamiltonian(&p, q, r, levels).unwrap(),
            build_displaced_hamiltonian(&p, q, r, levels).unwrap(),
        ] {
            prop_assert!(h.hermiticity_error() <= 1e-12 * h.max_abs().max(1.0));
        }
    }
}

#[test]
fn ladder_follows_square_roots() {
    let p = SystemParams::reference_sample();
    let (g, l) = coupling_ladder(&p);
    assert!((g[0] / MHZ - 130.0).abs() < 1e-9);
    assert!((g[1] / MHZ - 130.0 * 2f64.sqrt()).abs() < 1e-9);
    assert_eq!(l[0], 1.0);
    let two = p.with_truncation(2, 4).unwrap();
    assert_eq!(coupling_ladder(&two).0.len(), 1);
}

#[test]
fn reference_sample_shift() {
    let p = SystemParams::reference_sample();
    let dc = dispersive_constants(&p).unwrap();
    assert!((dc.chi / MHZ + 1.5).abs() < 0.05, "{}", dc.chi / MHZ);
    // Independent closed form g²α/[Δ(Δ+α)].
    let closed = predicted_chi(p.g, p.delta(), p.anharmonicity).unwrap();
    let by_hand = p.g * p.g * p.anharmonicity / (p.delta() * (p.delta() + p.anharmonicity));
    assert_eq!(closed, by_hand);
    assert!((closed / MHZ + 1.5).abs() < 0.05);
    assert!((dc.chi0 / MHZ - 9.2).abs() < 0.1);
}

#[test]
fn displaced_sector_rotation_rates_are_plus_minus_chi() {
    // With ω_d = ω_r − χ₁/2 the b†b coefficient is −χ for g and +χ for e.
    let p = SystemParams::reference_sample()
        .with_truncation(3, 6)
        .unwrap();
    let dc = dispersive_constants(&p).unwrap();
    assert!((p.delta_r() - dc.chi1 / 2.0).abs() < 1e-6 * dc.chi1.abs());
    let h =
        build_displaced_hamiltonian(&p, C64::new(20.0 * MHZ, 0.0), C64::new(0.0, 0.0), 3).unwrap();
    let nf = p.n_fock;
    let step = |k: usize| (h[(k * nf + 2, k * nf + 2)] - h[(k * nf + 1, k * nf + 1)]).re;
    assert!((step(0) + dc.chi).abs() < 1e-6 * dc.chi.abs());
    assert!((step(1) - dc.chi).abs() < 1e-6 * dc.chi.abs());
}

#[test]
fn dispersive_levels_match_exact_spectrum_to_third_order() {
    // Undriven two-level Jaynes–Cummings: the dispersive diagonal must track
    // the exact eigenvalues up to terms of order n² g⁴/Δ³.
    let p = SystemParams::reference_sample()
        .with_truncation(2, 8)
        .unwrap();
    let exact = build_rotating_hamiltonian(&p, C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        .unwrap()
        .hermitian_eigenvalues()
        .unwrap();
    let disp = build_dispersive_hamiltonian(&p, C64::new(0.0, 0.0), C64::new(0.0, 0.0), 2).unwrap();
    let delta = p.shifted_detunings()[1];
    let scale = p.g.powi(4) / delta.abs().powi(3);
    for k in 0..2 {
        for n in 0..5 {
            let i = k * p.n_fock + n;
            let e = disp[(i, i)].re;
            let nearest = exact
                .iter()
                .map(|x| (x - e).abs())
                .fold(f64::INFINITY, f64::min);
            let m = (n + k + 1) as f64;
            assert!(
                nearest <= 4.0 * m * m * scale,
                "k={k} n={n}: {nearest:e} vs {:e}",
                scale
            );
        }
    }
}
