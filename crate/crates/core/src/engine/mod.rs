//! Fixed-step Lindblad integration under piecewise drives.
//!
//! The state obeys `ρ̇ = −i[H, ρ] + κ D[a]ρ + γ₁ D[σ₋]ρ` with
//! `D[L]ρ = LρL† − ½{L†L, ρ}`, so the field amplitude relaxes at κ/2 and the
//! excited-state population at γ₁.

mod export;
mod kernel;
mod schedule;

use std::f64::consts::{PI, SQRT_2};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    annihilation, coherent_state, kron, ComplexMatrix, DensityMatrix, C64, I, ZERO,
};
use crate::system::{
    build_rotating_hamiltonian, build_shifted_dispersive, check_dim, Qubit, SystemParams,
};

pub use export::{trajectory_csv, write_trajectory_csv};
pub use schedule::{PulseSchedule, Segment};

use kernel::{Liouvillian, Rk4};

/// Steps per period of the fastest frequency in the problem.
pub const STEPS_PER_PERIOD: f64 = 50.0;
/// Trace drift that aborts a run.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-4;
/// Highest-Fock population above which a truncation warning is attached.
pub const TRUNCATION_WARN_POPULATION: f64 = 1e-3;

/// Which Hamiltonian drives the evolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Full multilevel Jaynes–Cummings model in the drive frame.
    #[default]
    Rotating,
    /// Second-order dispersive model on up to three transmon levels.
    Dispersive,
    /// Dispersive model written about a fixed displacement β, the virtual
    /// origin of the first segment. Reported amplitudes are always ⟨a⟩.
    Displaced,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `|q⟩ ⊗ |0⟩` in the simulation basis.
    Bare(Qubit),
    /// Eigenstate of the undriven Hamiltonian closest to `|q⟩ ⊗ |0⟩`.
    /// Identical to `Bare` in the dispersive frames.
    Dressed(Qubit),
    /// Arbitrary state on the frame's joint space, in terms of `a`.
    Custom(DensityMatrix),
}

impl InitialState {
    pub fn label(&self) -> Option<Qubit> {
        match self {
            InitialState::Bare(q) | InitialState::Dressed(q) => Some(*q),
            InitialState::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Integrator step; `None` picks the largest step allowed.
    pub dt: Option<f64>,
    pub sample_interval: f64,
    pub frame: Frame,
    /// Accept a step above the stability rule.
    pub allow_large_dt: bool,
    /// Compute the smallest eigenvalue of ρ at every snapshot.
    pub check_positivity: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: None,
            sample_interval: 2e-9,
            frame: Frame::Rotating,
            allow_large_dt: false,
            check_positivity: true,
        }
    }
}

impl EvolveOptions {
    pub fn frame(frame: Frame) -> Self {
        Self {
            frame,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dt: f64,
    pub dt_limit: f64,
    pub steps: usize,
    pub max_trace_drift: f64,
    /// Largest ‖ρ − ρ†‖ produced by a step, before re-symmetrization.
    pub max_step_asymmetry: f64,
    /// Largest ‖ρ − ρ†‖ at a snapshot, after re-symmetrization.
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: Option<f64>,
    /// max |dΩ_q/dt| / (Δ²/√2).
    pub adiabaticity_ratio: f64,
    pub max_top_fock_population: f64,
    /// Displacement β of the simulation frame (zero unless displaced).
    pub displacement: C64,
}

/// Expectation values sampled along one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// ⟨a⟩.
    pub alpha: Vec<C64>,
    /// `populations[k][i]` is the population of transmon level k at sample i.
    pub populations: Vec<Vec<f64>>,
    /// ⟨a†a⟩.
    pub photon_number: Vec<f64>,
    pub prep: Option<Qubit>,
    pub frame: Frame,
    /// State at the end of the schedule, in the simulation frame.
    pub final_state: DensityMatrix,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_alpha(&self) -> C64 {
        *self
            .alpha
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn n_levels(&self) -> usize {
        self.populations.len()
    }

    /// A record carrying only amplitudes, e.g. read back from CSV or built
    /// synthetically. Photon numbers assume coherent states; no state or
    /// populations are attached.
    pub fn from_amplitudes(times: Vec<f64>, alpha: Vec<C64>, prep: Option<Qubit>) -> Result<Self> {
        if times.is_empty() || times.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: "one amplitude per time".into(),
                found: format!("{} times, {} amplitudes", times.len(), alpha.len()),
            });
        }
        Ok(Self {
            photon_number: alpha.iter().map(|a| a.norm_sqr()).collect(),
            times,
            alpha,
            populations: Vec::new(),
            prep,
            frame: Frame::Dispersive,
            final_state: DensityMatrix::from_raw(ComplexMatrix::identity(1)),
            diagnostics: Diagnostics {
                dt: 0.0,
                dt_limit: 0.0,
                steps: 0,
                max_trace_drift: 0.0,
                max_step_asymmetry: 0.0,
                max_hermiticity_error: 0.0,
                min_eigenvalue: None,
                adiabaticity_ratio: 0.0,
                max_top_fock_population: 0.0,
                displacement: ZERO,
            },
            warnings: Vec::new(),
        })
    }
}

/// Lindblad superoperator `LρL† − ½{L†L, ρ}`.
pub fn lindblad_dissipator(l: &ComplexMatrix, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    let r = rho.matrix();
    if l.rows() != r.rows() || !l.is_square() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} jump operator", r.rows()),
            found: format!("{}x{}", l.rows(), l.cols()),
        });
    }
    let ld = l.adjoint();
    let ll = &ld * l;
    let jump = &(l * r) * &ld;
    let anti = &(&ll * r) + &(r * &ll);
    Ok(&jump - &anti.scale(C64::new(0.5, 0.0)))
}

/// Largest population of |f⟩ and above along a trajectory.
pub fn leakage(traj: &Trajectory) -> Result<f64> {
    if traj.n_levels() < 3 {
        return Err(Error::NotApplicable(format!(
            "leakage needs at least 3 transmon levels, trajectory has {}",
            traj.n_levels()
        )));
    }
    Ok((0..traj.len())
        .map(|i| traj.populations[2..].iter().map(|p| p[i]).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Everything the integrator needs for one frame.
struct FrameModel {
    levels: usize,
    n_fock: usize,
    beta: C64,
    parts: [ComplexMatrix; 5],
    a: ComplexMatrix,
}

/// Unit used when extracting the affine drive components; large enough that
/// the subtraction does not lose digits against GHz-scale diagonals.
const COMPONENT_SCALE: f64 = 1e9;

impl FrameModel {
    fn new(params: &SystemParams, schedule: &PulseSchedule, frame: Frame) -> Result<Self> {
        params.validate()?;
        let levels = match frame {
            Frame::Rotating => params.n_transmon,
            Frame::Dispersive | Frame::Displaced => params.n_transmon.min(3),
        };
        check_dim(levels, params.n_fock)?;
        let beta = match frame {
            Frame::Displaced => {
                if params.g == 0.0 {
                    return Err(Error::NotApplicable("displaced frame needs g ≠ 0".into()));
                }
                -schedule.segments[0].omega_q / params.g
            }
            _ => ZERO,
        };
        let build = |q: C64, r: C64| -> Result<ComplexMatrix> {
            match frame {
                Frame::Rotating => build_rotating_hamiltonian(params, q, r),
                Frame::Dispersive => build_shifted_dispersive(params, q, r, levels, ZERO),
                Frame::Displaced => build_shifted_dispersive(params, q, r, levels, beta),
            }
        };
        let a = kron(
            &ComplexMatrix::identity(levels),
            &annihilation(params.n_fock)?,
        );
        let mut base = build(ZERO, ZERO)?;
        if beta != ZERO {
            // Damping seen from the displaced frame: i(κ/2)(β* b − β b†).
            let hx = &a.scale(I * beta.conj()) - &a.adjoint().scale(I * beta);
            base = &base + &hx.scale(C64::new(params.kappa() / 2.0, 0.0));
        }
        let s = COMPONENT_SCALE;
        let unit = [
            (C64::new(s, 0.0), ZERO),
            (C64::new(0.0, s), ZERO),
            (ZERO, C64::new(s, 0.0)),
            (ZERO, C64::new(0.0, s)),
        ];
        let h0 = build(ZERO, ZERO)?;
        let mut comps = Vec::with_capacity(4);
        for (q, r) in unit {
            comps.push((&build(q, r)? - &h0).scale(C64::new(1.0 / s, 0.0)));
        }
        let [c1, c2, c3, c4]: [ComplexMatrix; 4] = comps.try_into().expect("four drive components");
        let parts = [base, c1, c2, c3, c4];
        Ok(Self {
            levels,
            n_fock: params.n_fock,
            beta,
            parts,
            a,
        })
    }

    fn hamiltonian(&self, q: C64, r: C64) -> ComplexMatrix {
        let u = [q.re, q.im, r.re, r.im];
        let mut h = self.parts[0].clone();
        for (c, uc) in u.iter().enumerate() {
            if *uc != 0.0 {
                h = &h + &self.parts[c + 1].scale(C64::new(*uc, 0.0));
            }
        }
        h
    }

    fn dim(&self) -> usize {
        self.levels * self.n_fock
    }

    fn jumps(&self, params: &SystemParams) -> Vec<(f64, ComplexMatrix)> {
        let mut jumps = Vec::new();
        if params.kappa() > 0.0 {
            jumps.push((params.kappa(), self.a.clone()));
        }
        if params.gamma_1 > 0.0 {
            let mut sm = ComplexMatrix::zeros(self.levels, self.levels);
            for k in 0..self.levels - 1 {
                sm[(k, k + 1)] = C64::new(((k + 1) as f64).sqrt(), 0.0);
            }
            jumps.push((
                params.gamma_1,
                kron(&sm, &ComplexMatrix::identity(self.n_fock)),
            ));
        }
        jumps
    }

    /// D(γ) = exp(γ a† − γ* a) on the joint space.
    fn displacement(&self, gamma: C64) -> Result<ComplexMatrix> {
        (&self.a.adjoint().scale(gamma) - &self.a.scale(gamma.conj())).expm()
    }

    fn initial_state(&self, init: &InitialState, frame: Frame) -> Result<DensityMatrix> {
        let nf = self.n_fock;
        match init {
            InitialState::Bare(q) | InitialState::Dressed(q) => {
                if q.level() >= self.levels {
                    return Err(Error::InvalidDimension {
                        what: "initial transmon level",
                        value: q.level(),
                    });
                }
                if matches!(init, InitialState::Dressed(_)) && frame == Frame::Rotating {
                    return self.dressed(*q);
                }
                // a-vacuum is the coherent state |−β⟩ of b.
                DensityMatrix::product(self.levels, q.level(), &coherent_state(-self.beta, nf))
            }
            InitialState::Custom(rho) => {
                if rho.dim() != self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("initial state of dimension {}", self.dim()),
                        found: format!("{}", rho.dim()),
                    });
                }
                if self.beta == ZERO {
                    return Ok(rho.clone());
                }
                let d = self.displacement(-self.beta)?;
                let m = &(&d * rho.matrix()) * &d.adjoint();
                let mut out = DensityMatrix::from_raw(m);
                out.symmetrize();
                Ok(out)
            }
        }
    }

    fn dressed(&self, q: Qubit) -> Result<DensityMatrix> {
        let h = self.hamiltonian(ZERO, ZERO).to_nalgebra();
        let eig = h.symmetric_eigen();
        let target = q.level() * self.n_fock;
        let (best, _) = (0..self.dim())
            .map(|c| (c, eig.eigenvectors[(target, c)].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty spectrum");
        let col = eig.eigenvectors.column(best);
        let phase = col[target].conj() / col[target].norm();
        let psi: Vec<C64> = col.iter().map(|x| x * phase).collect();
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        DensityMatrix::pure(&psi.iter().map(|x| x / norm).collect::<Vec<_>>())
    }
}

/// Largest step allowed by the rule `dt ≤ 1/(50 f_max)`, where `f_max` is the
/// eigenvalue spread (in Hz) of the frame Hamiltonian at its strongest drive.
pub fn max_stable_dt(params: &SystemParams, schedule: &PulseSchedule, frame: Frame) -> Result<f64> {
    schedule.validate()?;
    let model = FrameModel::new(params, schedule, frame)?;
    spread_limit(&model, schedule)
}

fn spread_limit(model: &FrameModel, schedule: &PulseSchedule) -> Result<f64> {
    let mut spread = 0.0f64;
    let drives = std::iter::once((ZERO, ZERO))
        .chain(schedule.segments.iter().map(|s| (s.omega_q, s.omega_r)));
    for (q, r) in drives {
        let h = model.hamiltonian(q, r);
        // Hermitian part only; the damping shifts are negligible here.
        let herm = (&h + &h.adjoint()).scale(C64::new(0.5, 0.0));
        let ev = herm.hermitian_eigenvalues()?;
        spread = spread.max(ev[ev.len() - 1] - ev[0]);
    }
    let f_max = spread / (2.0 * PI);
    Ok(if f_max > 0.0 {
        1.0 / (STEPS_PER_PERIOD * f_max)
    } else {
        f64::INFINITY
    })
}

/// Integrates the master equation over `schedule`.
pub fn evolve(
    params: &SystemParams,
    schedule: &PulseSchedule,
    initial: &InitialState,
    options: &EvolveOptions,
) -> Result<Trajectory> {
    schedule.validate()?;
    if !(options.sample_interval.is_finite() && options.sample_interval > 0.0) {
        return Err(Error::InvalidParameter {
            field: "sample_interval",
            reason: format!("must be positive, got {}", options.sample_interval),
        });
    }
    let model = FrameModel::new(params, schedule, options.frame)?;
    let limit = spread_limit(&model, schedule)?;
    let total = schedule.total_duration();
    let dt = match options.dt {
        Some(dt) => {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidParameter {
                    field: "dt",
                    reason: format!("must be positive, got {dt}"),
                });
            }
            if dt > limit && !options.allow_large_dt {
                return Err(Error::StepTooLarge { dt, limit });
            }
            dt
        }
        None => limit.min(total),
    };

    let rho0 = model.initial_state(initial, options.frame)?;
    let n = model.dim();
    let mut rho = rho0.into_matrix().into_vec();
    let mut lv = Liouvillian::new(model.parts.clone(), model.jumps(params));
    let mut rk = Rk4::new(n);

    let samples = sample_times(total, options.sample_interval);
    let breaks = breakpoints(schedule, &samples);
    let bounds = schedule.boundaries();

    let mut obs = Recorder::new(&model, options.check_positivity, samples.len());
    let mut diag = Diagnostics {
        dt,
        dt_limit: limit,
        steps: 0,
        max_trace_drift: 0.0,
        max_step_asymmetry: 0.0,
        max_hermiticity_error: 0.0,
        min_eigenvalue: None,
        adiabaticity_ratio: 0.0,
        max_top_fock_population: 0.0,
        displacement: model.beta,
    };

    let mut next_sample = 0;
    let record =
        |t: f64, rho: &[C64], obs: &mut Recorder, diag: &mut Diagnostics| obs.record(t, rho, diag);
    if samples.first() == Some(&0.0) {
        record(0.0, &rho, &mut obs, &mut diag)?;
        next_sample = 1;
    }

    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        let seg = bounds
            .windows(2)
            .position(|b| mid >= b[0] && mid < b[1])
            .unwrap_or(schedule.segments.len() - 1);
        let seg_start = bounds[seg];
        let len = t1 - t0;
        let steps = ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        let constant = schedule.rise_time == 0.0 || t0 - seg_start >= schedule.rise_time;
        if constant {
            let (q, r) = schedule.drives_in_segment(seg, mid - seg_start);
            lv.set_drives(q, r);
        }
        for s in 0..steps {
            let ts = t0 + s as f64 * h;
            let off = ts - seg_start;
            let asym = rk.step(
                &mut lv,
                &mut rho,
                h,
                |tau| schedule.drives_in_segment(seg, off + tau),
                constant,
            );
            diag.max_step_asymmetry = diag.max_step_asymmetry.max(asym);
            diag.steps += 1;
        }
        if next_sample < samples.len() && (samples[next_sample] - t1).abs() <= 1e-9 * dt {
            record(samples[next_sample], &rho, &mut obs, &mut diag)?;
            next_sample += 1;
        }
    }
    // Guard against a drifting state that never hit a snapshot.
    let drift = (trace(&rho, n) - 1.0).abs();
    if !(drift <= TRACE_DRIFT_LIMIT) {
        return Err(Error::IntegratorInstability { drift, time: total });
    }

    let slew = schedule.max_qubit_slew(dt);
    let delta = params.delta();
    diag.adiabaticity_ratio = if delta != 0.0 {
        slew / (delta * delta / SQRT_2)
    } else {
        f64::INFINITY
    };
    debug!(
        "evolve: {} steps of {:.3e} s, max dΩq/dt/(Δ²/√2) = {:.3e}",
        diag.steps, dt, diag.adiabaticity_ratio
    );

    let mut warnings = Vec::new();
    if diag.max_top_fock_population > TRUNCATION_WARN_POPULATION {
        let msg = format!(
            "truncation: population of the highest Fock level reached {:.3e}; increase n_fock",
            diag.max_top_fock_population
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let final_state = DensityMatrix::from_raw(ComplexMatrix::from_vec(n, n, rho)?);
    Ok(Trajectory {
        times: obs.times,
        alpha: obs.alpha,
        populations: obs.populations,
        photon_number: obs.photon_number,
        prep: initial.label(),
        frame: options.frame,
        final_state,
        diagnostics: diag,
        warnings,
    })
}

/// Runs the g and e preparations concurrently.
pub fn evolve_pair(
    params: &SystemParams,
    schedule: &PulseSchedule,
    initial: [&InitialState; 2],
    options: &EvolveOptions,
) -> Result<(Trajectory, Trajectory)> {
    let (a, b) = rayon::join(
        || evolve(params, schedule, initial[0], options),
        || evolve(params, schedule, initial[1], options),
    );
    Ok((a?, b?))
}

/// Independent evolutions in parallel, results in input order.
pub fn evolve_batch(
    jobs: &[(SystemParams, PulseSchedule, InitialState)],
    options: &EvolveOptions,
) -> Vec<Result<Trajectory>> {
    use rayon::prelude::*;
    jobs.par_iter()
        .map(|(p, s, i)| evolve(p, s, i, options))
        .collect()
}

/// Multiples of `interval`, closed with the end time when it falls between.
fn sample_times(total: f64, interval: f64) -> Vec<f64> {
    let count = (total / interval + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=count).map(|k| k as f64 * interval).collect();
    if total - t[count] > 1e-9 * interval {
        t.push(total);
    }
    t
}

fn breakpoints(schedule: &PulseSchedule, samples: &[f64]) -> Vec<f64> {
    let total = schedule.total_duration();
    let mut b: Vec<f64> = schedule.boundaries();
    if schedule.rise_time > 0.0 {
        b.extend(
            schedule.boundaries()[..schedule.segments.len()]
                .iter()
                .map(|t| t + schedule.rise_time),
        );
    }
    b.extend_from_slice(samples);
    b.retain(|t| *t >= 0.0 && *t <= total * (1.0 + 1e-12));
    b.sort_by(f64::total_cmp);
    let tol = 1e-12 * total;
    b.dedup_by(|x, y| (*x - *y).abs() <= tol);
    b
}

fn trace(rho: &[C64], n: usize) -> f64 {
    (0..n).map(|i| rho[i * n + i].re).sum()
}

struct Recorder {
    levels: usize,
    n_fock: usize,
    beta: C64,
    check_positivity: bool,
    times: Vec<f64>,
    alpha: Vec<C64>,
    populations: Vec<Vec<f64>>,
    photon_number: Vec<f64>,
}

impl Recorder {
    fn new(model: &FrameModel, check_positivity: bool, capacity: usize) -> Self {
        Self {
            levels: model.levels,
            n_fock: model.n_fock,
            beta: model.beta,
            check_positivity,
            times: Vec::with_capacity(capacity),
            alpha: Vec::with_capacity(capacity),
            populations: vec![Vec::with_capacity(capacity); model.levels],
            photon_number: Vec::with_capacity(capacity),
        }
    }

    fn record(&mut self, t: f64, rho: &[C64], diag: &mut Diagnostics) -> Result<()> {
        let nf = self.n_fock;
        let n = self.levels * nf;
        let tr = trace(rho, n);
        let drift = (tr - 1.0).abs();
        if !(drift <= TRACE_DRIFT_LIMIT) {
            return Err(Error::IntegratorInstability { drift, time: t });
        }
        diag.max_trace_drift = diag.max_trace_drift.max(drift);

        let mut b = ZERO;
        let mut nb = 0.0;
        let mut top = 0.0;
        for k in 0..self.levels {
            let mut pop = 0.0;
            for m in 0..nf {
                let i = k * nf + m;
                let p = rho[i * n + i].re;
                pop += p;
                nb += m as f64 * p;
                if m + 1 < nf {
                    // tr(bρ) picks ρ[m+1, m]
                    b += rho[(i + 1) * n + i] * ((m + 1) as f64).sqrt();
                }
            }
            top += rho[(k * nf + nf - 1) * (n + 1)].re;
            self.populations[k].push(pop);
        }
        diag.max_top_fock_population = diag.max_top_fock_population.max(top);
        let beta = self.beta;
        self.alpha.push(b + beta * tr);
        self.photon_number
            .push(nb + 2.0 * (beta.conj() * b).re + beta.norm_sqr() * tr);
        self.times.push(t);

        let mut herm = 0.0f64;
        for i in 0..n {
            for j in i..n {
                herm = herm.max((rho[i * n + j] - rho[j * n + i].conj()).norm());
            }
        }
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(herm);
        if self.check_positivity {
            let m = ComplexMatrix::from_vec(n, n, rho.to_vec())?;
            let min = m.hermitian_eigenvalues()?[0];
            diag.min_eigenvalue = Some(diag.min_eigenvalue.map_or(min, |v: f64| v.min(min)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{expectation, number, projector};
    use crate::system::TWO_PI;

    fn cavity_only(n_fock: usize) -> SystemParams {
        let mut p = SystemParams::reference_sample()
            .with_truncation(2, n_fock)
            .unwrap();
        p.g = 0.0;
        p
    }

    #[test]
    fn dissipator_examples() {
        let a = annihilation(4).unwrap();
        let vac = DensityMatrix::pure(&coherent_state(ZERO, 4)).unwrap();
        assert!(lindblad_dissipator(&a, &vac).unwrap().max_abs() < 1e-15);

        let one = DensityMatrix::new(projector(4, 1, 1)).unwrap();
        let d = lindblad_dissipator(&a, &one).unwrap();
        let want = &projector(4, 0, 0) - &projector(4, 1, 1);
        assert!(d.max_abs_diff(&want) < 1e-15);
        assert!(lindblad_dissipator(&annihilation(3).unwrap(), &one).is_err());
    }

    #[test]
    fn vacuum_is_stationary() {
        let p = SystemParams::reference_sample()
            .with_truncation(2, 5)
            .unwrap();
        let s = PulseSchedule::constant(20e-9, ZERO, ZERO).unwrap();
        let t = evolve(
            &p,
            &s,
            &InitialState::Bare(Qubit::Ground),
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!(t.alpha.iter().all(|a| a.norm() < 1e-12));
        assert_eq!(t.len(), 11);
    }

    #[test]
    fn driven_damped_cavity() {
        let p = cavity_only(12);
        let wr = C64::new(TWO_PI * 0.5e6, 0.0);
        let s = PulseSchedule::constant(200e-9, ZERO, wr).unwrap();
        let t = evolve(
            &p,
            &s,
            &InitialState::Bare(Qubit::Ground),
            &EvolveOptions::default(),
        )
        .unwrap();
        let k = p.kappa();
        for (ti, a) in t.times.iter().zip(&t.alpha) {
            let want = wr * (2.0 / k) * (1.0 - (-k * ti / 2.0).exp());
            assert!((a - want).norm() < 1e-8, "t={ti}: {a} vs {want}");
        }
    }

    #[test]
    fn qubit_decay_rate() {
        let mut p = cavity_only(3);
        p.gamma_1 = 1.0 / 3.5e-6;
        let s = PulseSchedule::constant(100e-9, ZERO, ZERO).unwrap();
        let opts = EvolveOptions::frame(Frame::Dispersive);
        let t = evolve(&p, &s, &InitialState::Bare(Qubit::Excited), &opts).unwrap();
        let pe = *t.populations[1].last().unwrap();
        assert!((pe - (-100e-9 * p.gamma_1).exp()).abs() < 1e-9);
    }

    #[test]
    fn displaced_frame_reports_lab_amplitude() {
        let p = SystemParams::reference_sample()
            .with_truncation(2, 14)
            .unwrap();
        let wq = C64::new(TWO_PI * 20e6, 0.0);
        let wr = C64::new(0.0, TWO_PI * 0.3e6);
        let s = PulseSchedule::constant(40e-9, wq, wr).unwrap();
        let init = InitialState::Bare(Qubit::Excited);
        let a = evolve(&p, &s, &init, &EvolveOptions::frame(Frame::Dispersive)).unwrap();
        let b = evolve(&p, &s, &init, &EvolveOptions::frame(Frame::Displaced)).unwrap();
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            assert!((x - y).norm() < 1e-6, "{x} vs {y}");
        }
        for (x, y) in a.photon_number.iter().zip(&b.photon_number) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_large_step() {
        let p = SystemParams::reference_sample()
            .with_truncation(2, 4)
            .unwrap();
        let s = PulseSchedule::constant(1e-9, ZERO, ZERO).unwrap();
        let o = EvolveOptions {
            dt: Some(1e-10),
            ..EvolveOptions::default()
        };
        assert!(matches!(
            evolve(&p, &s, &InitialState::Bare(Qubit::Ground), &o),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn custom_initial_state() {
        let p = cavity_only(10);
        let psi = coherent_state(C64::new(0.4, 0.2), 10);
        let rho = DensityMatrix::product(2, 0, &psi).unwrap();
        let s = PulseSchedule::constant(2e-9, ZERO, ZERO).unwrap();
        let t = evolve(
            &p,
            &s,
            &InitialState::Custom(rho.clone()),
            &EvolveOptions::default(),
        )
        .unwrap();
        let a = kron(&ComplexMatrix::identity(2), &annihilation(10).unwrap());
        assert!((t.alpha[0] - expectation(&a, &rho).unwrap()).norm() < 1e-9);
        let nn = kron(&ComplexMatrix::identity(2), &number(10));
        assert!((t.photon_number[0] - expectation(&nn, &rho).unwrap().re).abs() < 1e-9);
        assert_eq!(t.prep, None);
    }

    #[test]
    fn leakage_requires_three_levels() {
        let p = SystemParams::reference_sample()
            .with_truncation(2, 3)
            .unwrap();
        let s = PulseSchedule::constant(2e-9, ZERO, ZERO).unwrap();
        let t = evolve(
            &p,
            &s,
            &InitialState::Bare(Qubit::Ground),
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!(matches!(leakage(&t), Err(Error::NotApplicable(_))));
    }
}
