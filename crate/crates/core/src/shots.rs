//! Synthetic single-shot readout: matched weights, noisy integration of the
//! resonator amplitude, nearest-reference assignment and error curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::operator::{C64, ZERO};
use crate::system::Qubit;

/// Shots per independently seeded RNG stream.
pub const BATCH: usize = 1024;
/// Amplifier noise factor used when none is configured. With 2 ns samples it
/// puts the 420 ns conventional readout of the reference sample (three-level
/// dispersive model) at 96.5 % assignment fidelity; see
/// [`calibrate_noise_factor`].
pub const DEFAULT_NOISE_FACTOR: f64 = 166.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFunctions {
    pub times: Vec<f64>,
    pub w_re: Vec<f64>,
    pub w_im: Vec<f64>,
    /// Quadrature width of each sample; the first sample has width 0.
    pub dt: Vec<f64>,
    /// Set when a channel carries no separation and was zeroed.
    pub re_degenerate: bool,
    pub im_degenerate: bool,
}

impl WeightFunctions {
    /// Flat weights `1/T` on both channels.
    pub fn uniform(times: &[f64]) -> Result<Self> {
        let dt = widths(times)?;
        let total: f64 = dt.iter().sum();
        let w = vec![1.0 / total; times.len()];
        Ok(Self {
            times: times.to_vec(),
            w_re: w.clone(),
            w_im: w,
            dt,
            re_degenerate: false,
            im_degenerate: false,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Noiseless `Ŝ` for an amplitude record on the same grid.
    pub fn integrate(&self, alpha: &[C64]) -> C64 {
        let mut s = ZERO;
        for i in 0..self.len() {
            s.re += self.w_re[i] * self.dt[i] * alpha[i].re;
            s.im += self.w_im[i] * self.dt[i] * alpha[i].im;
        }
        s
    }
}

fn widths(times: &[f64]) -> Result<Vec<f64>> {
    if times.len() < 2 {
        return Err(invalid("times", "need at least two samples"));
    }
    let mut dt = Vec::with_capacity(times.len());
    dt.push(0.0);
    for w in times.windows(2) {
        let d = w[1] - w[0];
        if !(d > 0.0) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        dt.push(d);
    }
    Ok(dt)
}

fn same_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.times != b.times {
        return Err(Error::DimensionMismatch {
            expected: "trajectories on a shared time grid".into(),
            found: format!("{} vs {} samples", a.len(), b.len()),
        });
    }
    Ok(())
}

/// `W_re ∝ |Re(α_e − α_g)|`, `W_im ∝ |Im(α_e − α_g)|`, each normalized to
/// `Σ w dt = 1`. A channel with no separation is zeroed and flagged.
pub fn matched_weights(traj_g: &Trajectory, traj_e: &Trajectory) -> Result<WeightFunctions> {
    same_grid(traj_g, traj_e)?;
    weights_from_separation(&traj_g.times, &traj_g.alpha, &traj_e.alpha)
}

fn weights_from_separation(times: &[f64], a_g: &[C64], a_e: &[C64]) -> Result<WeightFunctions> {
    let dt = widths(times)?;
    let d: Vec<C64> = a_e.iter().zip(a_g).map(|(e, g)| e - g).collect();
    let scale = a_g.iter().chain(a_e).map(|z| z.norm()).fold(0.0, f64::max);
    let tiny = 1e-12 * scale;
    let channel = |part: fn(&C64) -> f64| -> Option<Vec<f64>> {
        let raw: Vec<f64> = d.iter().map(|z| part(z).abs()).collect();
        let norm: f64 = raw.iter().zip(&dt).map(|(w, h)| w * h).sum();
        let peak = raw.iter().skip(1).copied().fold(0.0, f64::max);
        if !(norm > 0.0) || peak <= tiny {
            None
        } else {
            Some(raw.iter().map(|w| w / norm).collect())
        }
    };
    let re = channel(|z| z.re);
    let im = channel(|z| z.im);
    if re.is_none() && im.is_none() {
        return Err(Error::DegenerateWeights);
    }
    let zeros = || vec![0.0; times.len()];
    Ok(WeightFunctions {
        times: times.to_vec(),
        re_degenerate: re.is_none(),
        im_degenerate: im.is_none(),
        w_re: re.unwrap_or_else(zeros),
        w_im: im.unwrap_or_else(zeros),
        dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation per quadrature added to α at each sample of
    /// duration `sample_interval`. Samples of other widths are rescaled as
    /// white noise.
    pub sigma_quadrature: f64,
    pub sample_interval: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_quadrature: f64, sample_interval: f64, seed: u64) -> Result<Self> {
        let m = Self {
            sigma_quadrature,
            sample_interval,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    /// Vacuum variance of 1/2 per quadrature and sample, scaled by the
    /// amplifier noise factor `noise_factor ≥ 1`.
    pub fn calibrated(noise_factor: f64, sample_interval: f64, seed: u64) -> Result<Self> {
        if !(noise_factor >= 1.0) {
            return Err(invalid("noise_factor", "must be at least 1"));
        }
        Self::new((noise_factor / 2.0).sqrt(), sample_interval, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_quadrature.is_finite() && self.sigma_quadrature > 0.0) {
            return Err(invalid("sigma_quadrature", "must be positive"));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(invalid("sample_interval", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub s: C64,
    /// Label the experiment intended to prepare.
    pub prepared: Qubit,
    /// State actually present after thermal flips.
    pub true_label: Qubit,
    pub assigned_label: Option<Qubit>,
}

/// Draws noisy shots for preparation `prep`.
///
/// `pair` holds the g and e trajectories; a g preparation is found in e with
/// probability `thermal_eps` and then follows the e record.
pub fn sample_shots(
    pair: [&Trajectory; 2],
    prep: Qubit,
    weights: &WeightFunctions,
    noise: &NoiseModel,
    n_shots: usize,
    thermal_eps: f64,
) -> Result<Vec<ShotRecord>> {
    same_grid(pair[0], pair[1])?;
    sample_streams(
        [&pair[0].alpha, &pair[1].alpha],
        prep,
        weights,
        noise,
        n_shots,
        thermal_eps,
        0,
    )
}

fn sample_streams(
    alpha: [&[C64]; 2],
    prep: Qubit,
    weights: &WeightFunctions,
    noise: &NoiseModel,
    n_shots: usize,
    thermal_eps: f64,
    stream_base: u64,
) -> Result<Vec<ShotRecord>> {
    noise.validate()?;
    if n_shots == 0 {
        return Err(invalid("n_shots", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&thermal_eps) {
        return Err(invalid("thermal_eps", "must lie in [0, 1)"));
    }
    let n = weights.len();
    if alpha[0].len() < n || alpha[1].len() < n {
        return Err(Error::DimensionMismatch {
            expected: format!("at least {n} amplitude samples"),
            found: format!("{}", alpha[0].len().min(alpha[1].len())),
        });
    }
    let clean = [weights.integrate(alpha[0]), weights.integrate(alpha[1])];
    // Per-sample noise gains for each channel.
    let gain: Vec<(f64, f64)> = (0..n)
        .filter(|&i| weights.dt[i] > 0.0)
        .map(|i| {
            let h = weights.dt[i];
            let sigma = noise.sigma_quadrature * (noise.sample_interval / h).sqrt();
            (weights.w_re[i] * h * sigma, weights.w_im[i] * h * sigma)
        })
        .collect();
    let prep_bit = match prep {
        Qubit::Ground => 0u64,
        Qubit::Excited => 1u64,
    };
    let batches = n_shots.div_ceil(BATCH);
    let out: Vec<Vec<ShotRecord>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(stream_base.wrapping_mul(4).wrapping_add(prep_bit) << 32 | b as u64);
            let count = BATCH.min(n_shots - b * BATCH);
            (0..count)
                .map(|_| {
                    let truth = if prep == Qubit::Ground && rng.random::<f64>() < thermal_eps {
                        Qubit::Excited
                    } else {
                        prep
                    };
                    let mut s = clean[truth.level()];
                    for &(gr, gi) in &gain {
                        let xr: f64 = rng.sample(StandardNormal);
                        let xi: f64 = rng.sample(StandardNormal);
                        s.re += gr * xr;
                        s.im += gi * xi;
                    }
                    ShotRecord {
                        s,
                        prepared: prep,
                        true_label: truth,
                        assigned_label: None,
                    }
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Nearest-reference rule; exact ties go to g.
pub fn assign(shots: &[ShotRecord], ref_g: C64, ref_e: C64) -> Result<Vec<ShotRecord>> {
    if ref_g == ref_e {
        return Err(Error::IdenticalReferences);
    }
    Ok(shots
        .iter()
        .map(|s| ShotRecord {
            assigned_label: Some(nearest(s.s, ref_g, ref_e)),
            ..*s
        })
        .collect())
}

/// Misassignment probability of nearest-reference assignment with the
/// references at the noiseless integrals, from the Gaussian noise projected
/// on the g→e axis: `½ erfc(|d| / (2√2 σ_∥))`.
pub fn predicted_error(
    weights: &WeightFunctions,
    alpha_g: &[C64],
    alpha_e: &[C64],
    noise: &NoiseModel,
) -> Result<f64> {
    noise.validate()?;
    let d = weights.integrate(alpha_e) - weights.integrate(alpha_g);
    let (mut var_re, mut var_im) = (0.0, 0.0);
    for i in 0..weights.len() {
        let h = weights.dt[i];
        if h > 0.0 {
            let v = noise.sigma_quadrature.powi(2) * noise.sample_interval * h;
            var_re += weights.w_re[i].powi(2) * v;
            var_im += weights.w_im[i].powi(2) * v;
        }
    }
    let dist = d.norm();
    if dist == 0.0 {
        return Ok(0.5);
    }
    let sigma = ((d.re * d.re * var_re + d.im * d.im * var_im) / (dist * dist)).sqrt();
    Ok(0.5 * libm::erfc(dist / (2.0 * std::f64::consts::SQRT_2 * sigma)))
}

fn prefix_len(traj: &Trajectory, tau: f64) -> Result<usize> {
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    if !(tau > 0.0) || tau > t_end * (1.0 + 1e-9) {
        return Err(Error::OutOfRange {
            what: "tau",
            value: tau,
        });
    }
    let n = traj
        .times
        .iter()
        .take_while(|&&t| t <= tau * (1.0 + 1e-9))
        .count();
    if n < 2 {
        return Err(invalid("tau", "shorter than one sample interval"));
    }
    Ok(n)
}

/// Amplifier noise factor at which matched-filter readout of the pair over
/// `[0, τ]` has the predicted error `target_error`.
pub fn calibrate_noise_factor(
    traj_g: &Trajectory,
    traj_e: &Trajectory,
    tau: f64,
    target_error: f64,
    sample_interval: f64,
) -> Result<f64> {
    same_grid(traj_g, traj_e)?;
    if !(target_error > 0.0 && target_error < 0.5) {
        return Err(Error::OutOfRange {
            what: "target_error",
            value: target_error,
        });
    }
    let n = prefix_len(traj_g, tau)?;
    let (a_g, a_e) = (&traj_g.alpha[..n], &traj_e.alpha[..n]);
    let w = weights_from_separation(&traj_g.times[..n], a_g, a_e)?;
    let err = |f: f64| -> Result<f64> {
        predicted_error(
            &w,
            a_g,
            a_e,
            &NoiseModel::calibrated(f, sample_interval, 0)?,
        )
    };
    let (mut lo, mut hi) = (1.0f64, 1e12f64);
    if err(lo)? > target_error {
        return Err(invalid(
            "target_error",
            "not reachable even without amplifier noise",
        ));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if err(mid)? < target_error {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

fn nearest(s: C64, ref_g: C64, ref_e: C64) -> Qubit {
    if (s - ref_g).norm_sqr() <= (s - ref_e).norm_sqr() {
        Qubit::Ground
    } else {
        Qubit::Excited
    }
}

/// Mean `S` per prepared label.
pub fn references(shots: &[ShotRecord]) -> Result<(C64, C64)> {
    let mean = |q: Qubit| -> Result<C64> {
        let (sum, n) = shots
            .iter()
            .filter(|s| s.prepared == q)
            .fold((ZERO, 0usize), |(acc, n), s| (acc + s.s, n + 1));
        if n == 0 {
            return Err(Error::EmptyClass(q));
        }
        Ok(sum / n as f64)
    };
    Ok((mean(Qubit::Ground)?, mean(Qubit::Excited)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentError {
    pub p_e_given_g: f64,
    pub p_g_given_e: f64,
    pub total: f64,
}

/// `[p(e|g) + p(g|e)]/2` against the prepared labels of assigned shots.
pub fn assignment_error(shots: &[ShotRecord]) -> Result<AssignmentError> {
    let rate = |q: Qubit| -> Result<f64> {
        let mut n = 0usize;
        let mut wrong = 0usize;
        for s in shots.iter().filter(|s| s.prepared == q) {
            let a = s
                .assigned_label
                .ok_or_else(|| invalid("shots", "assign labels before computing errors"))?;
            n += 1;
            wrong += usize::from(a != q);
        }
        if n == 0 {
            return Err(Error::EmptyClass(q));
        }
        Ok(wrong as f64 / n as f64)
    };
    let p_e_given_g = rate(Qubit::Ground)?;
    let p_g_given_e = rate(Qubit::Excited)?;
    Ok(AssignmentError {
        p_e_given_g,
        p_g_given_e,
        total: 0.5 * (p_e_given_g + p_g_given_e),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub tau: f64,
    pub error: AssignmentError,
    /// `total − ε_prep`, clamped at zero, when a preparation error is given.
    pub corrected: Option<f64>,
    /// Weights fell back to uniform because the branches never separated.
    pub uniform_weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignSettings {
    pub n_shots: usize,
    pub thermal_eps: f64,
    pub eps_prep: Option<f64>,
}

/// Assignment error against integration time. For each τ the weights are
/// rebuilt on `[0, τ]`, both preparations are resampled with independent
/// streams, references are taken from the shots and labels assigned.
pub fn error_vs_time(
    traj_g: &Trajectory,
    traj_e: &Trajectory,
    noise: &NoiseModel,
    settings: &CampaignSettings,
    taus: &[f64],
) -> Result<Vec<ErrorPoint>> {
    same_grid(traj_g, traj_e)?;
    if let Some(e) = settings.eps_prep {
        if !(0.0..1.0).contains(&e) {
            return Err(invalid("eps_prep", "must lie in [0, 1)"));
        }
    }
    let mut out = Vec::with_capacity(taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        let n = prefix_len(traj_g, tau)?;
        let times = &traj_g.times[..n];
        let (a_g, a_e) = (&traj_g.alpha[..n], &traj_e.alpha[..n]);
        let (weights, uniform) = match weights_from_separation(times, a_g, a_e) {
            Ok(w) => (w, false),
            Err(Error::DegenerateWeights) => (WeightFunctions::uniform(times)?, true),
            Err(e) => return Err(e),
        };
        let stream = k as u64 + 1;
        let mut shots = sample_streams(
            [a_g, a_e],
            Qubit::Ground,
            &weights,
            noise,
            settings.n_shots,
            settings.thermal_eps,
            stream,
        )?;
        shots.extend(sample_streams(
            [a_g, a_e],
            Qubit::Excited,
            &weights,
            noise,
            settings.n_shots,
            settings.thermal_eps,
            stream,
        )?);
        let (ref_g, ref_e) = references(&shots)?;
        let error = if ref_g == ref_e {
            AssignmentError {
                p_e_given_g: 0.0,
                p_g_given_e: 1.0,
                total: 0.5,
            }
        } else {
            assignment_error(&assign(&shots, ref_g, ref_e)?)?
        };
        out.push(ErrorPoint {
            tau,
            corrected: settings.eps_prep.map(|e| (error.total - e).max(0.0)),
            error,
            uniform_weights: uniform,
        });
    }
    Ok(out)
}

/// Signed coordinate of `s` along the axis from `ref_g` towards `ref_e`.
pub fn project_onto_axis(s: C64, ref_g: C64, ref_e: C64) -> Result<f64> {
    let axis = ref_e - ref_g;
    let len = axis.norm();
    if len == 0.0 {
        return Err(Error::IdenticalReferences);
    }
    Ok(((s - ref_g) * axis.conj()).re / len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    pub count_g: Vec<u64>,
    pub count_e: Vec<u64>,
}

/// Histogram of projected shots split by prepared label.
pub fn histogram(shots: &[ShotRecord], ref_g: C64, ref_e: C64, n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(invalid("n_bins", "must be at least 1"));
    }
    if shots.is_empty() {
        return Err(invalid("shots", "empty"));
    }
    let z: Vec<f64> = shots
        .iter()
        .map(|s| project_onto_axis(s.s, ref_g, ref_e))
        .collect::<Result<_>>()?;
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / n_bins as f64
    } else {
        1.0
    };
    let mut h = Histogram {
        bin_centers: (0..n_bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        count_g: vec![0; n_bins],
        count_e: vec![0; n_bins],
    };
    for (s, x) in shots.iter().zip(&z) {
        let k = (((x - lo) / width) as usize).min(n_bins - 1);
        match s.prepared {
            Qubit::Ground => h.count_g[k] += 1,
            Qubit::Excited => h.count_e[k] += 1,
        }
    }
    Ok(h)
}

/// CSV with columns `re_S,im_S,true_label,assigned_label`.
pub fn shots_csv(shots: &[ShotRecord]) -> String {
    let mut s = String::from("re_S,im_S,true_label,assigned_label\n");
    for r in shots {
        s.push_str(&format!(
            "{:.16e},{:.16e},{},{}\n",
            r.s.re,
            r.s.im,
            r.true_label.label(),
            r.assigned_label.map_or("", |q| q.label())
        ));
    }
    s
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("bin_center,count_g,count_e\n");
    for k in 0..h.bin_centers.len() {
        s.push_str(&format!(
            "{:.16e},{},{}\n",
            h.bin_centers[k], h.count_g[k], h.count_e[k]
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(times: &[f64], alpha: Vec<C64>, q: Qubit) -> Trajectory {
        Trajectory::from_amplitudes(times.to_vec(), alpha, Some(q)).unwrap()
    }

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..=n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn constant_separation_gives_flat_weights() {
        let t = grid(50, 2e-9);
        let g = fake(&t, vec![C64::new(0.0, 0.0); 51], Qubit::Ground);
        let e = fake(&t, vec![C64::new(1.0, -2.0); 51], Qubit::Excited);
        let w = matched_weights(&g, &e).unwrap();
        for i in 1..51 {
            assert!((w.w_re[i] - 1.0 / 100e-9).abs() < 1e-6 / 100e-9);
            assert!((w.w_im[i] - 1.0 / 100e-9).abs() < 1e-6 / 100e-9);
        }
    }

    #[test]
    fn purely_real_separation_flags_imaginary_channel() {
        let t = grid(10, 1e-9);
        let g = fake(
            &t,
            (0..11).map(|k| C64::new(-0.1 * k as f64, 0.3)).collect(),
            Qubit::Ground,
        );
        let e = fake(
            &t,
            (0..11).map(|k| C64::new(0.1 * k as f64, 0.3)).collect(),
            Qubit::Excited,
        );
        let w = matched_weights(&g, &e).unwrap();
        assert!(w.im_degenerate && !w.re_degenerate);
        assert!(w.w_im.iter().all(|&x| x == 0.0));
        let s: f64 = w.w_re.iter().zip(&w.dt).map(|(a, b)| a * b).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_trajectories_are_degenerate() {
        let t = grid(10, 1e-9);
        let a = vec![C64::new(0.5, 0.5); 11];
        let g = fake(&t, a.clone(), Qubit::Ground);
        let e = fake(&t, a, Qubit::Excited);
        assert!(matches!(
            matched_weights(&g, &e),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn tie_goes_to_ground() {
        let s = ShotRecord {
            s: C64::new(0.0, 3.0),
            prepared: Qubit::Excited,
            true_label: Qubit::Excited,
            assigned_label: None,
        };
        let r = assign(&[s], C64::new(-1.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert_eq!(r[0].assigned_label, Some(Qubit::Ground));
        assert!(matches!(
            assign(&[s], ZERO, ZERO),
            Err(Error::IdenticalReferences)
        ));
    }

    #[test]
    fn single_shot_reference() {
        let mk = |q, s| ShotRecord {
            s,
            prepared: q,
            true_label: q,
            assigned_label: None,
        };
        let shots = [
            mk(Qubit::Ground, C64::new(1.0, 2.0)),
            mk(Qubit::Excited, C64::new(-3.0, 0.5)),
        ];
        assert_eq!(
            references(&shots).unwrap(),
            (C64::new(1.0, 2.0), C64::new(-3.0, 0.5))
        );
        assert!(matches!(
            references(&shots[..1]),
            Err(Error::EmptyClass(Qubit::Excited))
        ));
    }

    #[test]
    fn projection_axis() {
        let z =
            project_onto_axis(C64::new(0.0, 2.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0)).unwrap();
        assert!((z - 3.0).abs() < 1e-15);
    }
}
