//! Calibration fits: the thermal two-Gaussian histogram model, effective
//! temperature and randomized-benchmarking decays.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;

const MIN_SAMPLES: usize = 1000;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGaussianFit {
    /// Weight of the minority (thermally excited) component.
    pub eps_th: f64,
    pub center_g: f64,
    pub center_e: f64,
    /// Shared standard deviation.
    pub sigma: f64,
    /// No second component could be resolved; `eps_th` is 0 and both centers
    /// coincide.
    pub degenerate: bool,
    pub iterations: usize,
    /// Weighted residual sum of squares per degree of freedom.
    pub reduced_chi2: f64,
}

struct Hist {
    centers: Vec<f64>,
    counts: Vec<f64>,
    width: f64,
}

fn hist(samples: &[f64], width: f64) -> Hist {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0.0; n];
    for &x in samples {
        let k = (((x - lo) / width) as usize).min(n - 1);
        counts[k] += 1.0;
    }
    Hist {
        centers: (0..n).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        counts,
        width,
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn gauss(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Least-squares fit of `(1−ε) N(μ_g, σ) + ε N(μ_e, σ)` to the histogram of
/// projected single shots. The majority component is labelled g.
///
/// Initialization is deterministic: the tallest bin gives μ_g, the
/// interquartile range gives σ, and the largest excess over a single Gaussian
/// more than 2σ away gives μ_e and ε.
pub fn fit_two_gaussian(samples: &[f64]) -> Result<TwoGaussianFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(invalid("samples", "need at least 1000 samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(invalid("samples", "must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sigma0 = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.349;
    if !(sigma0 > 0.0) {
        return Err(Error::DegenerateFit("samples have no spread".into()));
    }
    let total = samples.len() as f64;
    let h = hist(samples, sigma0 / 4.0);
    let kmax = (0..h.counts.len())
        .max_by(|&a, &b| h.counts[a].total_cmp(&h.counts[b]))
        .unwrap_or(0);
    // Mean-shift from the tallest bin; the bin center alone is too noisy.
    let mut mu_g0 = h.centers[kmax];
    for _ in 0..5 {
        let lo = sorted.partition_point(|&x| x < mu_g0 - sigma0);
        let hi = sorted.partition_point(|&x| x <= mu_g0 + sigma0);
        if hi > lo {
            mu_g0 = sorted[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        }
    }
    let excess: Vec<f64> = h
        .centers
        .iter()
        .zip(&h.counts)
        .map(|(&x, &c)| c - total * h.width * gauss(x, mu_g0, sigma0))
        .collect();
    let mut second = None;
    let mut best = 0.0;
    for (k, &x) in h.centers.iter().enumerate() {
        if (x - mu_g0).abs() < 2.0 * sigma0 {
            continue;
        }
        // Excess mass within ±σ of the candidate.
        let lo = k.saturating_sub(4);
        let hi = (k + 5).min(h.counts.len());
        let mass: f64 = excess[lo..hi].iter().sum();
        let expected: f64 = (lo..hi)
            .map(|j| total * h.width * gauss(h.centers[j], mu_g0, sigma0))
            .sum();
        if mass > best && mass > 10.0 && mass > 5.0 * (expected + 1.0).sqrt() {
            best = mass;
            second = Some(x);
        }
    }

    // Bin at σ/4 for the fit itself, trimmed to the populated range.
    let residuals = |p: &[f64], out: &mut Vec<f64>| {
        out.clear();
        let (eps, mg, me, s) = (p[0], p[1], p[2], p[3].abs());
        for (x, c) in h.centers.iter().zip(&h.counts) {
            let m = total * h.width * ((1.0 - eps) * gauss(*x, mg, s) + eps * gauss(*x, me, s));
            out.push((c - m) / (c + 1.0).sqrt());
        }
    };

    let single = || -> Result<TwoGaussianFit> {
        let (p, iterations, chi2) = levenberg_marquardt(
            |p: &[f64], out: &mut Vec<f64>| residuals(&[0.0, p[0], p[0], p[1]], out),
            vec![mu_g0, sigma0],
            |_| {},
        )?;
        Ok(TwoGaussianFit {
            eps_th: 0.0,
            center_g: p[0],
            center_e: p[0],
            sigma: p[1].abs(),
            degenerate: true,
            iterations,
            reduced_chi2: chi2 / (h.counts.len().saturating_sub(2).max(1)) as f64,
        })
    };
    let Some(mu_e0) = second else {
        return single();
    };
    let eps0 = (best / total).clamp(1e-4, 0.49);
    let (p, iterations, chi2) =
        levenberg_marquardt(residuals, vec![eps0, mu_g0, mu_e0, sigma0], |p| {
            p[0] = p[0].clamp(0.0, 1.0)
        })?;
    let (mut eps, mut mg, mut me, sigma) = (p[0], p[1], p[2], p[3].abs());
    if eps > 0.5 {
        eps = 1.0 - eps;
        std::mem::swap(&mut mg, &mut me);
    }
    if (me - mg).abs() < sigma {
        // The components merged: no resolvable second population.
        return single();
    }
    Ok(TwoGaussianFit {
        eps_th: eps,
        center_g: mg,
        center_e: me,
        sigma,
        degenerate: false,
        iterations,
        reduced_chi2: chi2 / (h.counts.len().saturating_sub(4).max(1)) as f64,
    })
}

/// Damped Gauss–Newton with a forward-difference Jacobian. `project` maps
/// each trial point back onto the feasible set.
fn levenberg_marquardt(
    f: impl Fn(&[f64], &mut Vec<f64>),
    x0: Vec<f64>,
    project: impl Fn(&mut [f64]),
) -> Result<(Vec<f64>, usize, f64)> {
    let np = x0.len();
    let mut x = x0;
    let mut r = Vec::new();
    f(&x, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut rp = Vec::new();
    for it in 1..=MAX_ITER {
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, np);
        for j in 0..np {
            let h = 1e-7 * x[j].abs().max(1e-8);
            let mut xp = x.clone();
            xp[j] += h;
            f(&xp, &mut rp);
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut xn);
            f(&xn, &mut rp);
            let cn: f64 = rp.iter().map(|v| v * v).sum();
            if cn.is_finite() && cn <= cost {
                let rel = (cost - cn) / cost.max(1e-300);
                let small_step = step
                    .iter()
                    .zip(&x)
                    .all(|(s, xi)| s.abs() <= 1e-10 * (xi.abs() + 1e-10));
                x = xn;
                std::mem::swap(&mut r, &mut rp);
                cost = cn;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || small_step {
                    return Ok((x, it, cost));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: the current point is stationary.
            return Ok((x, it, cost));
        }
    }
    Err(Error::FitFailure {
        reason: "Levenberg–Marquardt did not converge".into(),
        iterations: MAX_ITER,
        residual: cost,
    })
}

/// `ħω_q / (k_B ln(1/ε_th))` in kelvin; `omega_q` in rad/s.
pub fn effective_temperature(eps_th: f64, omega_q: f64) -> Result<f64> {
    if !(eps_th > 0.0 && eps_th < 1.0) {
        return Err(Error::OutOfRange {
            what: "eps_th",
            value: eps_th,
        });
    }
    if !(omega_q > 0.0) {
        return Err(invalid("omega_q", "must be positive"));
    }
    Ok(HBAR * omega_q / (K_B * (1.0 / eps_th).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub residual: f64,
}

/// Fits `A p^L + B` with `0 < p < 1`.
///
/// For fixed p the model is linear in (A, B), so p is found by a scan and a
/// golden-section search on the projected residual, then all three
/// parameters are polished by Gauss–Newton.
pub fn fit_rb_decay(lengths: &[f64], survival: &[f64]) -> Result<RbFit> {
    if lengths.len() != survival.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} survival values", lengths.len()),
            found: survival.len().to_string(),
        });
    }
    let mut distinct = lengths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(invalid(
            "lengths",
            "need at least 4 distinct sequence lengths",
        ));
    }
    if lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(invalid("lengths", "must be non-negative"));
    }
    if survival.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("survival", "probabilities must lie in [0, 1]"));
    }

    let linear = |p: f64| -> (f64, f64, f64) {
        // Normal equations for [p^L, 1].
        let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (l, y) in lengths.iter().zip(survival) {
            let u = p.powf(*l);
            s11 += u * u;
            s12 += u;
            s22 += 1.0;
            t1 += u * y;
            t2 += y;
        }
        let det = s11 * s22 - s12 * s12;
        if det.abs() < 1e-300 {
            return (0.0, t2 / s22, f64::INFINITY);
        }
        let a = (t1 * s22 - t2 * s12) / det;
        let b = (s11 * t2 - s12 * t1) / det;
        let res: f64 = lengths
            .iter()
            .zip(survival)
            .map(|(l, y)| {
                let e = a * p.powf(*l) + b - y;
                e * e
            })
            .sum();
        (a, b, res)
    };

    // Scan p = 1 − 10^(−x) to cover both fast and slow decays.
    let grid: Vec<f64> = (0..=600)
        .map(|k| 1.0 - 10f64.powf(-(k as f64) / 100.0 - 1e-3))
        .collect();
    let k = (0..grid.len())
        .min_by(|&a, &b| linear(grid[a]).2.total_cmp(&linear(grid[b]).2))
        .unwrap_or(0);
    let lo = if k == 0 { 1e-9 } else { grid[k - 1] };
    let hi = if k + 1 == grid.len() {
        return Err(Error::FitFailure {
            reason: "decay parameter runs to p = 1".into(),
            iterations: grid.len(),
            residual: linear(grid[k]).2,
        });
    } else {
        grid[k + 1]
    };
    let p = golden_min(|p| linear(p).2, lo, hi);
    let (a, b, _) = linear(p);

    // Gauss–Newton polish in (A, p, B).
    let mut x = [a, p, b];
    for _ in 0..20 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (l, y) in lengths.iter().zip(survival) {
            let u = x[1].powf(*l);
            let du = if *l == 0.0 {
                0.0
            } else {
                l * x[1].powf(l - 1.0)
            };
            let j = [u, x[0] * du, 1.0];
            let r = x[0] * u + x[2] - y;
            for m in 0..3 {
                jtr[m] += j[m] * r;
                for n in 0..3 {
                    jtj[m][n] += j[m] * j[n];
                }
            }
        }
        let mat = nalgebra::Matrix3::from_fn(|m, n| jtj[m][n]);
        let Some(step) = mat.lu().solve(&nalgebra::Vector3::from(jtr)) else {
            break;
        };
        let trial = [x[0] - step[0], x[1] - step[1], x[2] - step[2]];
        if !(trial[1] > 0.0 && trial[1] < 1.0) {
            break;
        }
        x = trial;
        if step.norm() < 1e-15 {
            break;
        }
    }
    let residual: f64 = lengths
        .iter()
        .zip(survival)
        .map(|(l, y)| (x[0] * x[1].powf(*l) + x[2] - y).powi(2))
        .sum();
    if !(x[1] > 0.0 && x[1] < 1.0) || !residual.is_finite() {
        return Err(Error::FitFailure {
            reason: "decay parameter left (0, 1)".into(),
            iterations: 20,
            residual,
        });
    }
    Ok(RbFit {
        a: x[0],
        p: x[1],
        b: x[2],
        residual,
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Gate error `(1 − p_gate/p_ref)/2` from interleaved and reference decays.
pub fn gate_error(p_ref: f64, p_gate: f64) -> Result<f64> {
    for (what, v) in [("p_ref", p_ref), ("p_gate", p_gate)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::OutOfRange { what, value: v });
        }
    }
    Ok((1.0 - p_gate / p_ref) / 2.0)
}

/// Preparation error as the sum of gate and thermal contributions.
pub fn prep_error(gate_error: f64, eps_th: f64) -> f64 {
    gate_error + eps_th
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TWO_PI;

    #[test]
    fn reference_temperature() {
        let t = effective_temperature(0.006, TWO_PI * 7.86e9).unwrap();
        assert!((t * 1e3 - 73.0).abs() < 1.0, "{t}");
        let t1 = effective_temperature((-1f64).exp(), TWO_PI * 7.86e9).unwrap();
        assert!((t1 * 1e3 - 377.2).abs() < 0.5, "{t1}");
        assert!(effective_temperature(1e-300, TWO_PI * 7.86e9).unwrap() < 1e-3);
        assert!(effective_temperature(0.0, 1.0).is_err());
        assert!(effective_temperature(1.0, 1.0).is_err());
    }

    #[test]
    fn gate_error_arithmetic() {
        let e = gate_error(0.99, 0.9504).unwrap();
        assert!((e - 0.02).abs() < 1e-12);
        assert!((prep_error(e, 0.006) - 0.026).abs() < 1e-12);
    }

    #[test]
    fn rb_noiseless_recovery() {
        let l: Vec<f64> = [1, 5, 10, 20, 50, 100, 200, 400]
            .iter()
            .map(|&x| x as f64)
            .collect();
        let y: Vec<f64> = l.iter().map(|&l| 0.5 * 0.99f64.powf(l) + 0.5).collect();
        let f = fit_rb_decay(&l, &y).unwrap();
        assert!((f.a - 0.5).abs() < 1e-9, "{f:?}");
        assert!((f.p - 0.99).abs() < 1e-9);
        assert!((f.b - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rb_preconditions() {
        assert!(fit_rb_decay(&[1.0, 2.0, 3.0], &[0.9, 0.8, 0.7]).is_err());
        assert!(fit_rb_decay(&[1.0, 2.0, 3.0, 4.0], &[0.9, 0.8, 1.7, 0.6]).is_err());
    }
}
