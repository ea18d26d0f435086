use mcread_core::shots::{
    assign, assignment_error, error_vs_time, matched_weights, predicted_error, references,
    sample_shots, CampaignSettings,
};
use mcread_core::{NoiseModel, Qubit, Trajectory, WeightFunctions, C64};
use proptest::prelude::*;

const SI: f64 = 2e-9;

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 * SI).collect()
}

/// Branches that leave the origin linearly in opposite directions.
fn ramp_pair(n: usize, d: C64) -> (Trajectory, Trajectory) {
    let t = grid(n);
    let total = t[n];
    let g: Vec<C64> = t.iter().map(|x| -d * (x / total) * 0.5).collect();
    let e: Vec<C64> = t.iter().map(|x| d * (x / total) * 0.5).collect();
    (
        Trajectory::from_amplitudes(t.clone(), g, Some(Qubit::Ground)).unwrap(),
        Trajectory::from_amplitudes(t, e, Some(Qubit::Excited)).unwrap(),
    )
}

fn flat_pair(n: usize, level_g: C64, level_e: C64) -> (Trajectory, Trajectory) {
    let t = grid(n);
    (
        Trajectory::from_amplitudes(t.clone(), vec![level_g; n + 1], Some(Qubit::Ground)).unwrap(),
        Trajectory::from_amplitudes(t, vec![level_e; n + 1], Some(Qubit::Excited)).unwrap(),
    )
}

fn mean_var(x: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = x.clone().count() as f64;
    let m = x.clone().sum::<f64>() / n;
    (m, x.map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn flat_weights_average_the_noise_down() {
    let n = 50;
    let (g, e) = flat_pair(n, C64::new(0.3, -0.2), C64::new(0.3, 0.4));
    let w = WeightFunctions::uniform(&g.times).unwrap();
    let sigma = 2.0;
    let noise = NoiseModel::new(sigma, SI, 11).unwrap();
    let shots = sample_shots([&g, &e], Qubit::Ground, &w, &noise, 100_000, 0.0).unwrap();
    let (m_re, v_re) = mean_var(shots.iter().map(|s| s.s.re));
    let (m_im, v_im) = mean_var(shots.iter().map(|s| s.s.im));
    let want = sigma * sigma / n as f64;
    assert!((v_re / want - 1.0).abs() < 0.03, "{v_re} vs {want}");
    assert!((v_im / want - 1.0).abs() < 0.03, "{v_im} vs {want}");
    assert!((m_re - 0.3).abs() < 5.0 * (want / 1e5).sqrt());
    assert!((m_im + 0.2).abs() < 5.0 * (want / 1e5).sqrt());
    // Real and imaginary noise are independent.
    let cov = shots
        .iter()
        .map(|s| (s.s.re - m_re) * (s.s.im - m_im))
        .sum::<f64>()
        / 1e5;
    assert!(cov.abs() < 5.0 * want / (1e5f64).sqrt());
}

#[test]
fn simulated_error_matches_gaussian_prediction() {
    let (g, e) = ramp_pair(100, C64::new(0.8, 0.6));
    let w = matched_weights(&g, &e).unwrap();
    let noise = NoiseModel::calibrated(40.0, SI, 3).unwrap();
    let p = predicted_error(&w, &g.alpha, &e.alpha, &noise).unwrap();
    assert!(
        p > 0.02 && p < 0.3,
        "pick a noise level with a measurable error: {p}"
    );
    let n = 50_000;
    let mut shots = sample_shots([&g, &e], Qubit::Ground, &w, &noise, n, 0.0).unwrap();
    shots.extend(sample_shots([&g, &e], Qubit::Excited, &w, &noise, n, 0.0).unwrap());
    let (rg, re) = (w.integrate(&g.alpha), w.integrate(&e.alpha));
    let err = assignment_error(&assign(&shots, rg, re).unwrap()).unwrap();
    let binom = (p * (1.0 - p) / (2 * n) as f64).sqrt();
    assert!(
        (err.total - p).abs() < 3.0 * binom,
        "{} vs {p} ± {binom}",
        err.total
    );
}

#[test]
fn shots_are_reproducible_per_seed() {
    let (g, e) = ramp_pair(20, C64::new(0.5, 0.5));
    let w = matched_weights(&g, &e).unwrap();
    let run = |seed| {
        let noise = NoiseModel::new(1.0, SI, seed).unwrap();
        sample_shots([&g, &e], Qubit::Excited, &w, &noise, 3000, 0.0).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
    let noise = NoiseModel::new(1.0, SI, 5).unwrap();
    let g_shots = sample_shots([&g, &e], Qubit::Ground, &w, &noise, 3000, 0.0).unwrap();
    assert_ne!(
        g_shots[0].s - w.integrate(&g.alpha),
        run(5)[0].s - w.integrate(&e.alpha)
    );
}

#[test]
fn thermal_population_biases_the_ground_reference() {
    let (g, e) = flat_pair(10, C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let w = WeightFunctions::uniform(&g.times).unwrap();
    let noise = NoiseModel::new(1e-6, SI, 1).unwrap();
    let eps = 0.1;
    let mut shots = sample_shots([&g, &e], Qubit::Ground, &w, &noise, 20_000, eps).unwrap();
    let flipped = shots
        .iter()
        .filter(|s| s.true_label == Qubit::Excited)
        .count() as f64
        / 2e4;
    let binom = (eps * (1.0 - eps) / 2e4).sqrt();
    assert!((flipped - eps).abs() < 4.0 * binom);
    shots.extend(sample_shots([&g, &e], Qubit::Excited, &w, &noise, 20_000, eps).unwrap());
    assert!(shots
        .iter()
        .all(|s| s.prepared == Qubit::Ground || s.true_label == Qubit::Excited));
    let (rg, re) = references(&shots).unwrap();
    assert!((rg.re - flipped).abs() < 1e-4);
    assert!((re.re - 1.0).abs() < 1e-4);
    // Nearly noiseless: only the flipped shots are misassigned, so the error is ε/2.
    let err = assignment_error(&assign(&shots, rg, re).unwrap()).unwrap();
    assert!((err.total - flipped / 2.0).abs() < 1e-12);
    assert_eq!(err.p_g_given_e, 0.0);
}

#[test]
fn identical_branches_give_chance_level() {
    let (g, e) = flat_pair(20, C64::new(0.5, 0.1), C64::new(0.5, 0.1));
    let noise = NoiseModel::new(0.5, SI, 2).unwrap();
    let settings = CampaignSettings {
        n_shots: 2000,
        thermal_eps: 0.0,
        eps_prep: None,
    };
    let pts = error_vs_time(&g, &e, &noise, &settings, &[10e-9, 40e-9]).unwrap();
    for p in pts {
        assert!(p.uniform_weights);
        assert!((p.error.total - 0.5).abs() < 0.03, "{:?}", p.error);
    }
}

#[test]
fn error_falls_with_integration_time() {
    let (g, e) = ramp_pair(200, C64::new(0.6, 0.3));
    let noise = NoiseModel::calibrated(200.0, SI, 9).unwrap();
    let settings = CampaignSettings {
        n_shots: 20_000,
        thermal_eps: 0.0,
        eps_prep: Some(0.001),
    };
    let taus = [40e-9, 100e-9, 200e-9, 400e-9];
    let pts = error_vs_time(&g, &e, &noise, &settings, &taus).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].error.total < w[0].error.total, "{:?}", pts);
    }
    for p in &pts {
        assert_eq!(p.corrected.unwrap(), (p.error.total - 0.001).max(0.0));
    }
    assert!(error_vs_time(&g, &e, &noise, &settings, &[500e-9]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Nearest-reference assignment commutes with any rotation, shift and
    /// positive scaling of the IQ plane.
    #[test]
    fn assignment_is_affine_invariant(
        seed in 0u64..1000,
        theta in 0.0f64..std::f64::consts::TAU,
        scale in 0.1f64..10.0,
        sr in -5.0f64..5.0, si in -5.0f64..5.0,
    ) {
        let (g, e) = ramp_pair(30, C64::new(0.4, -0.3));
        let w = matched_weights(&g, &e).unwrap();
        let noise = NoiseModel::new(3.0, SI, seed).unwrap();
        let mut shots = sample_shots([&g, &e], Qubit::Ground, &w, &noise, 500, 0.0).unwrap();
        shots.extend(sample_shots([&g, &e], Qubit::Excited, &w, &noise, 500, 0.0).unwrap());
        let (rg, re) = references(&shots).unwrap();
        let a = assign(&shots, rg, re).unwrap();
        let map = |z: C64| z * C64::from_polar(scale, theta) + C64::new(sr, si);
        let moved: Vec<_> = shots.iter().map(|s| mcread_core::ShotRecord { s: map(s.s), ..*s }).collect();
        let (mg, me) = references(&moved).unwrap();
        let b = assign(&moved, mg, me).unwrap();
        let mut differ = 0;
        for (x, y) in a.iter().zip(&b) {
            if x.assigned_label != y.assigned_label {
                // Only shots numerically on the decision boundary may flip.
                let dx = (x.s - rg).norm() - (x.s - re).norm();
                prop_assert!(dx.abs() < 1e-9 * (re - rg).norm());
                differ += 1;
            }
        }
        prop_assert!(differ <= 1);
    }

    /// Scaling both weight channels by the same factor leaves the predicted
    /// error unchanged.
    #[test]
    fn weight_scale_does_not_change_prediction(k in 0.01f64..100.0, f in 1.0f64..500.0) {
        let (g, e) = ramp_pair(40, C64::new(0.7, 0.2));
        let w = matched_weights(&g, &e).unwrap();
        let mut v = w.clone();
        v.w_re.iter_mut().for_each(|x| *x *= k);
        v.w_im.iter_mut().for_each(|x| *x *= k);
        let noise = NoiseModel::calibrated(f, SI, 0).unwrap();
        let a = predicted_error(&w, &g.alpha, &e.alpha, &noise).unwrap();
        let b = predicted_error(&v, &g.alpha, &e.alpha, &noise).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 + 1e-9 * a);
    }
}
