//! Readout schemes as drive schedules, paired g/e runs and the resonator
//! reset sequence.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{
    evolve, evolve_pair, EvolveOptions, Frame, InitialState, PulseSchedule, Segment, Trajectory,
};
use crate::error::{Error, Result};
use crate::operator::{DensityMatrix, C64, I, ZERO};
use crate::system::{dispersive_constants, DispersiveConstants, Qubit, SystemParams};

/// Steady-state photon number of the g branch that defines the reference
/// resonator drive.
pub const REFERENCE_PHOTONS: f64 = 2.5;
/// Largest tolerated e→f transfer when calibrating the reference qubit drive.
pub const LEAKAGE_BUDGET: f64 = 0.005;
/// Power reductions applied to the resonator and qubit drives in the
/// combined scheme, in dB.
pub const MULTICHANNEL_RESONATOR_DB: f64 = -2.0;
pub const MULTICHANNEL_QUBIT_DB: f64 = -1.0;
/// Phase error of the resonator drive in the imprecise-phase preset.
pub const IMPRECISE_PHASE_OFFSET: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Resonator drive only.
    Conventional,
    /// Qubit drive only.
    QubitOnly,
    /// Both drives, phase matched.
    Multichannel,
    /// Both drives with `iΩ_r = Ω_q χ₀/g₀`, which keeps the g branch at the origin.
    VacuumLock,
    /// Multichannel readout followed by a merge and a single displacement.
    UnconditionalReset,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::Conventional,
        ProtocolKind::QubitOnly,
        ProtocolKind::Multichannel,
        ProtocolKind::VacuumLock,
        ProtocolKind::UnconditionalReset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Conventional => "conventional",
            ProtocolKind::QubitOnly => "qubit_only",
            ProtocolKind::Multichannel => "multichannel",
            ProtocolKind::VacuumLock => "vacuum_lock",
            ProtocolKind::UnconditionalReset => "unconditional_reset",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidProtocol(format!("unknown protocol `{s}`")))
    }
}

/// Segments appended after the readout to return the resonator to vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetTail {
    /// Time spent with the qubit drive phase flipped by π.
    pub flip_duration: f64,
    /// Amplitude change applied by the closing resonator pulse.
    pub final_displacement: C64,
    pub displacement_duration: f64,
}

impl ResetTail {
    pub const DEFAULT_DISPLACEMENT_DURATION: f64 = 1e-9;

    /// A tail with the nominal hold π/|χ| and no displacement yet.
    pub fn nominal(chi: f64) -> Self {
        Self {
            flip_duration: PI / chi.abs(),
            final_displacement: ZERO,
            displacement_duration: Self::DEFAULT_DISPLACEMENT_DURATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// Readout duration (s).
    pub duration: f64,
    pub omega_q_mag: f64,
    pub omega_r_mag: f64,
    pub phi_q: f64,
    pub phi_r: f64,
    #[serde(default)]
    pub rise_time: f64,
    #[serde(default)]
    pub reset_tail: Option<ResetTail>,
}

impl ProtocolSpec {
    pub fn omega_q(&self) -> C64 {
        C64::from_polar(self.omega_q_mag, self.phi_q)
    }

    pub fn omega_r(&self) -> C64 {
        C64::from_polar(self.omega_r_mag, self.phi_r)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProtocol(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        for (name, v) in [
            ("omega_q_mag", self.omega_q_mag),
            ("omega_r_mag", self.omega_r_mag),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative magnitude, got {v}"));
            }
        }
        match self.kind {
            ProtocolKind::Conventional if self.omega_q_mag != 0.0 => {
                bad("conventional readout requires omega_q_mag = 0".into())
            }
            ProtocolKind::QubitOnly if self.omega_r_mag != 0.0 => {
                bad("qubit-only readout requires omega_r_mag = 0".into())
            }
            ProtocolKind::UnconditionalReset if self.reset_tail.is_none() => {
                bad("unconditional reset requires a reset_tail".into())
            }
            _ => Ok(()),
        }
    }
}

/// Reference drive magnitudes and the phase that maximizes separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCalibration {
    /// Resonator drive giving [`REFERENCE_PHOTONS`] in the g steady state.
    pub omega_r_ref: f64,
    /// Qubit drive at the e→f leakage budget.
    pub omega_q_ref: f64,
    /// `arg Ω_r − arg Ω_q` that maximizes ∫|α_e − α_g|² over the horizon
    /// for the multichannel magnitudes.
    pub relative_phase: f64,
    pub horizon: f64,
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

impl DriveCalibration {
    pub fn new(params: &SystemParams, horizon: f64) -> Result<Self> {
        let dc = dispersive_constants(params)?;
        let kappa = params.kappa();
        let c = dc.number_coefficients();
        let omega_r_ref = REFERENCE_PHOTONS.sqrt() * C64::new(-c[0], kappa / 2.0).norm();

        // e→f detuning in the drive frame.
        let delta_ef = if dc.levels == 3 {
            let e = dc.sector_energies();
            e[2] - e[1]
        } else {
            params.delta() + params.anharmonicity + params.delta_r()
        };
        let b = LEAKAGE_BUDGET;
        let coupling = 0.5 * delta_ef.abs() * (b / (1.0 - b)).sqrt();
        let omega_q_ref = coupling / std::f64::consts::SQRT_2;

        let model = SectorModel::new(&dc, kappa);
        let wq = omega_q_ref * db_to_amplitude(MULTICHANNEL_QUBIT_DB);
        let wr = omega_r_ref * db_to_amplitude(MULTICHANNEL_RESONATOR_DB);
        let score = |phi: f64| {
            model.separation_energy(C64::new(wq, 0.0), C64::from_polar(wr, phi), horizon, 400)
        };
        let grid = 720;
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..grid {
            let phi = 2.0 * PI * k as f64 / grid as f64;
            let s = score(phi);
            if s > best.1 {
                best = (phi, s);
            }
        }
        let step = 2.0 * PI / grid as f64;
        let phi = golden_max(&score, best.0 - step, best.0 + step, 1e-9);
        Ok(Self {
            omega_r_ref,
            omega_q_ref,
            relative_phase: phi.rem_euclid(2.0 * PI),
            horizon,
        })
    }

    pub fn conventional(&self, duration: f64) -> ProtocolSpec {
        ProtocolSpec {
            kind: ProtocolKind::Conventional,
            duration,
            omega_q_mag: 0.0,
            omega_r_mag: self.omega_r_ref,
            phi_q: 0.0,
            phi_r: 0.0,
            rise_time: 0.0,
            reset_tail: None,
        }
    }

    pub fn qubit_only(&self, duration: f64) -> ProtocolSpec {
        ProtocolSpec {
            kind: ProtocolKind::QubitOnly,
            omega_q_mag: self.omega_q_ref,
            omega_r_mag: 0.0,
            ..self.conventional(duration)
        }
    }

    /// Both drives reduced by 2 dB (resonator) and 1 dB (qubit), with the
    /// qubit drive real so the virtual origin lies on the negative real axis.
    pub fn multichannel(&self, duration: f64) -> ProtocolSpec {
        ProtocolSpec {
            kind: ProtocolKind::Multichannel,
            omega_q_mag: self.omega_q_ref * db_to_amplitude(MULTICHANNEL_QUBIT_DB),
            omega_r_mag: self.omega_r_ref * db_to_amplitude(MULTICHANNEL_RESONATOR_DB),
            phi_r: self.relative_phase,
            ..self.conventional(duration)
        }
    }

    pub fn imprecise_phase(&self, duration: f64) -> ProtocolSpec {
        let mut s = self.multichannel(duration);
        s.phi_r += IMPRECISE_PHASE_OFFSET;
        s
    }

    pub fn vacuum_lock(&self, duration: f64) -> ProtocolSpec {
        ProtocolSpec {
            kind: ProtocolKind::VacuumLock,
            ..self.multichannel(duration)
        }
    }

    pub fn unconditional_reset(&self, duration: f64, chi: f64) -> ProtocolSpec {
        ProtocolSpec {
            kind: ProtocolKind::UnconditionalReset,
            reset_tail: Some(ResetTail::nominal(chi)),
            ..self.multichannel(duration)
        }
    }

    /// Named presets accepted by the command line.
    pub fn preset(&self, name: &str, duration: f64, chi: f64) -> Result<ProtocolSpec> {
        let norm = name.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "conventional" => self.conventional(duration),
            "qubit_only" => self.qubit_only(duration),
            "multichannel" => self.multichannel(duration),
            "imprecise_phase" => self.imprecise_phase(duration),
            "vacuum_lock" => self.vacuum_lock(duration),
            "unconditional_reset" => self.unconditional_reset(duration, chi),
            _ => return Err(Error::InvalidProtocol(format!("unknown preset `{name}`"))),
        })
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "conventional",
    "qubit_only",
    "multichannel",
    "imprecise_phase",
    "vacuum_lock",
    "unconditional_reset",
];

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
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

/// Linear amplitude model of each qubit sector of the dispersive Hamiltonian,
/// ignoring qubit transitions: `α̇_j = −i c_j α_j + Ω_r − iΩ_q s_j − (κ/2) α_j`.
#[derive(Debug, Clone)]
pub struct SectorModel {
    c: Vec<f64>,
    s: Vec<f64>,
    kappa: f64,
}

impl SectorModel {
    pub fn new(dc: &DispersiveConstants, kappa: f64) -> Self {
        Self {
            c: dc.number_coefficients(),
            s: dc.qubit_drive_slopes(),
            kappa,
        }
    }

    fn lambda(&self, q: Qubit) -> C64 {
        -I * self.c[q.level()] - self.kappa / 2.0
    }

    fn source(&self, q: Qubit, wq: C64, wr: C64) -> C64 {
        wr - I * wq * self.s[q.level()]
    }

    /// Amplitude after `t` at constant drives, starting from `alpha0`.
    pub fn evolve(&self, q: Qubit, wq: C64, wr: C64, alpha0: C64, t: f64) -> C64 {
        let l = self.lambda(q);
        let z = l * t;
        let phi1 = if z.norm() < 1e-6 {
            1.0 + z / 2.0
        } else {
            (z.exp() - 1.0) / z
        };
        alpha0 * z.exp() + self.source(q, wq, wr) * t * phi1
    }

    /// `∫₀^T |α_e − α_g|² dt` from vacuum, by the midpoint rule.
    pub fn separation_energy(&self, wq: C64, wr: C64, horizon: f64, n: usize) -> f64 {
        let h = horizon / n as f64;
        (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                let d = self.evolve(Qubit::Excited, wq, wr, ZERO, t)
                    - self.evolve(Qubit::Ground, wq, wr, ZERO, t);
                d.norm_sqr() * h
            })
            .sum()
    }
}

/// Piecewise schedule for a protocol.
pub fn build_schedule(
    spec: &ProtocolSpec,
    constants: &DispersiveConstants,
) -> Result<PulseSchedule> {
    spec.validate()?;
    let wq = spec.omega_q();
    let mut wr = spec.omega_r();
    if spec.kind == ProtocolKind::VacuumLock {
        if constants.g0 == 0.0 || constants.chi0 == 0.0 {
            return Err(Error::InvalidProtocol(
                "vacuum lock needs non-zero g and χ".into(),
            ));
        }
        // iΩ_r = Ω_q χ₀/g₀
        wr = -I * wq * constants.chi0 / constants.g0;
    }
    let mut segments = vec![Segment::new(spec.duration, wq, wr)];
    if let Some(tail) = spec.reset_tail {
        if spec.kind != ProtocolKind::UnconditionalReset {
            return Err(Error::InvalidProtocol(
                "reset_tail is only valid for unconditional_reset".into(),
            ));
        }
        if !(tail.flip_duration > 0.0 && tail.displacement_duration > 0.0) {
            return Err(Error::InvalidProtocol(
                "reset tail durations must be positive".into(),
            ));
        }
        segments.push(Segment::new(tail.flip_duration, -wq, ZERO));
        segments.push(Segment::new(
            tail.displacement_duration,
            ZERO,
            tail.final_displacement / tail.displacement_duration,
        ));
    }
    PulseSchedule::new(segments, spec.rise_time)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationDiagnostics {
    pub times: Vec<f64>,
    /// `|α_e(t) − α_g(t)|`.
    pub separation: Vec<f64>,
    /// Separation at the first sample after t = 0 divided by its time.
    pub initial_rate: f64,
    pub max_separation: f64,
    pub time_of_max: f64,
}

impl SeparationDiagnostics {
    pub fn from_pair(g: &Trajectory, e: &Trajectory) -> Result<Self> {
        if g.times != e.times {
            return Err(Error::DimensionMismatch {
                expected: "g and e trajectories on the same time grid".into(),
                found: format!("{} vs {} samples", g.len(), e.len()),
            });
        }
        let separation: Vec<f64> = g
            .alpha
            .iter()
            .zip(&e.alpha)
            .map(|(a, b)| (b - a).norm())
            .collect();
        let initial_rate = if g.len() > 1 && g.times[1] > 0.0 {
            separation[1] / g.times[1]
        } else {
            0.0
        };
        let (imax, max_separation) =
            separation
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
                );
        Ok(Self {
            times: g.times.clone(),
            initial_rate,
            max_separation,
            time_of_max: g.times[imax],
            separation,
        })
    }
}

fn initial_for(frame: Frame, q: Qubit) -> InitialState {
    match frame {
        Frame::Rotating => InitialState::Dressed(q),
        _ => InitialState::Bare(q),
    }
}

/// Evolves both preparations concurrently under the protocol's schedule.
pub fn run_protocol(
    params: &SystemParams,
    spec: &ProtocolSpec,
    options: &EvolveOptions,
) -> Result<(Trajectory, Trajectory, SeparationDiagnostics)> {
    let dc = dispersive_constants(params)?;
    let schedule = build_schedule(spec, &dc)?;
    let (g, e) = evolve_pair(
        params,
        &schedule,
        [
            &initial_for(options.frame, Qubit::Ground),
            &initial_for(options.frame, Qubit::Excited),
        ],
        options,
    )?;
    let diag = SeparationDiagnostics::from_pair(&g, &e)?;
    Ok((g, e, diag))
}

/// Largest final `|α|` over both preparations.
pub fn reset_residual(
    params: &SystemParams,
    spec: &ProtocolSpec,
    options: &EvolveOptions,
) -> Result<f64> {
    if spec.kind != ProtocolKind::UnconditionalReset {
        return Err(Error::InvalidProtocol(
            "reset_residual needs an unconditional_reset protocol".into(),
        ));
    }
    let (g, e, _) = run_protocol(params, spec, options)?;
    Ok(g.final_alpha().norm().max(e.final_alpha().norm()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetTuning {
    pub spec: ProtocolSpec,
    pub nominal_hold: f64,
    /// `|α_e − α_g|` at the end of the tuned hold.
    pub merge_gap: f64,
    /// Common amplitude at the end of the hold.
    pub merge_amplitude: f64,
    pub residual: f64,
}

/// Tunes the hold time and the closing displacement of an unconditional
/// reset.
///
/// The nominal hold minimizes the g/e gap in the sector model. The simulated
/// gap is then scanned over ±10 % of it and refined by a parabola through the
/// best three points. The displacement is the least-squares amplitude that
/// brings both branches closest to vacuum; amplitudes are linear in it.
pub fn tune_reset(
    params: &SystemParams,
    spec: &ProtocolSpec,
    options: &EvolveOptions,
) -> Result<ResetTuning> {
    if spec.kind != ProtocolKind::UnconditionalReset {
        return Err(Error::InvalidProtocol(
            "tune_reset needs an unconditional_reset protocol".into(),
        ));
    }
    if options.frame == Frame::Displaced {
        return Err(Error::NotApplicable(
            "reset tuning restarts from saved states; use the rotating or dispersive frame".into(),
        ));
    }
    let tail = spec.reset_tail.unwrap_or(ResetTail::nominal(1.0));
    let dc = dispersive_constants(params)?;
    let readout = ProtocolSpec {
        kind: ProtocolKind::Multichannel,
        reset_tail: None,
        ..spec.clone()
    };
    let readout = if spec.omega_q_mag == 0.0 {
        ProtocolSpec {
            kind: ProtocolKind::Conventional,
            ..readout
        }
    } else {
        readout
    };
    let (g, e, _) = run_protocol(params, &readout, options)?;
    let start = [g.final_state.clone(), e.final_state.clone()];
    let alpha0 = [g.final_alpha(), e.final_alpha()];

    let wq = -spec.omega_q();
    let model = SectorModel::new(&dc, params.kappa());
    let chi = dc.chi.abs().max(1e-30);
    let span = 2.0 * PI / chi;
    let gap_model = |t: f64| {
        (model.evolve(Qubit::Excited, wq, ZERO, alpha0[1], t)
            - model.evolve(Qubit::Ground, wq, ZERO, alpha0[0], t))
        .norm()
    };
    let n = 4000;
    let mut nominal = span / n as f64;
    let mut best = f64::INFINITY;
    for k in 1..=n {
        let t = span * k as f64 / n as f64;
        let gap = gap_model(t);
        if gap < best {
            best = gap;
            nominal = t;
        }
    }

    let hold = |t: f64| -> Result<[Trajectory; 2]> {
        let s = PulseSchedule::constant(t, wq, ZERO)?;
        continue_pair(params, &s, &start, options)
    };
    let gap_of = |pair: &[Trajectory; 2]| (pair[1].final_alpha() - pair[0].final_alpha()).norm();
    let scan: Vec<f64> = (0..=10)
        .map(|k| nominal * (0.9 + 0.02 * k as f64))
        .collect();
    let mut gaps = Vec::with_capacity(scan.len());
    for t in &scan {
        gaps.push(gap_of(&hold(*t)?));
    }
    let ib = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut t_best = scan[ib];
    if ib > 0 && ib + 1 < scan.len() {
        let (y0, y1, y2) = (gaps[ib - 1], gaps[ib], gaps[ib + 1]);
        let den = y0 - 2.0 * y1 + y2;
        if den > 0.0 {
            let h = scan[1] - scan[0];
            t_best = scan[ib] + 0.5 * h * (y0 - y2) / den;
        }
    }
    let mut held = hold(t_best)?;
    if gap_of(&held) > gaps[ib] {
        t_best = scan[ib];
        held = hold(t_best)?;
    }
    let merge_gap = gap_of(&held);
    let merge_amplitude = 0.5 * (held[0].final_alpha() + held[1].final_alpha()).norm();

    // Closing displacement: α_j = a_j + b_j x for resonator drive x.
    let td = tail.displacement_duration;
    let mid = [held[0].final_state.clone(), held[1].final_state.clone()];
    let probe = 1.0 / td;
    let free = continue_pair(
        params,
        &PulseSchedule::constant(td, ZERO, ZERO)?,
        &mid,
        options,
    )?;
    let kick = continue_pair(
        params,
        &PulseSchedule::constant(td, ZERO, C64::new(probe, 0.0))?,
        &mid,
        options,
    )?;
    let a = [free[0].final_alpha(), free[1].final_alpha()];
    let b = [
        (kick[0].final_alpha() - a[0]) / probe,
        (kick[1].final_alpha() - a[1]) / probe,
    ];
    let den: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    let x = if den > 0.0 {
        -(b[0].conj() * a[0] + b[1].conj() * a[1]) / den
    } else {
        ZERO
    };
    let closing = continue_pair(
        params,
        &PulseSchedule::constant(td, ZERO, x)?,
        &mid,
        options,
    )?;
    let residual = closing[0]
        .final_alpha()
        .norm()
        .max(closing[1].final_alpha().norm());

    let mut tuned = spec.clone();
    tuned.reset_tail = Some(ResetTail {
        flip_duration: t_best,
        final_displacement: x * td,
        displacement_duration: td,
    });
    Ok(ResetTuning {
        spec: tuned,
        nominal_hold: nominal,
        merge_gap,
        merge_amplitude,
        residual,
    })
}

/// Continues both branches from saved states; samples land on the end time.
fn continue_pair(
    params: &SystemParams,
    schedule: &PulseSchedule,
    start: &[DensityMatrix; 2],
    options: &EvolveOptions,
) -> Result<[Trajectory; 2]> {
    let total = schedule.total_duration();
    let mut opts = options.clone();
    opts.sample_interval = total;
    opts.check_positivity = false;
    let (a, b) = rayon::join(
        || {
            evolve(
                params,
                schedule,
                &InitialState::Custom(start[0].clone()),
                &opts,
            )
        },
        || {
            evolve(
                params,
                schedule,
                &InitialState::Custom(start[1].clone()),
                &opts,
            )
        },
    );
    Ok([a?, b?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TWO_PI;

    fn two_level() -> SystemParams {
        SystemParams::reference_sample()
            .with_truncation(2, 8)
            .unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert_eq!(
            "qubit-only".parse::<ProtocolKind>().unwrap(),
            ProtocolKind::QubitOnly
        );
        assert!("bogus".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn invariants_enforced() {
        let dc = dispersive_constants(&two_level()).unwrap();
        let cal = DriveCalibration::new(&two_level(), 300e-9).unwrap();
        let mut conv = cal.conventional(420e-9);
        let s = build_schedule(&conv, &dc).unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].omega_q, ZERO);
        conv.omega_q_mag = 1.0;
        assert!(build_schedule(&conv, &dc).is_err());
        let mut q = cal.qubit_only(100e-9);
        q.omega_r_mag = 1.0;
        assert!(build_schedule(&q, &dc).is_err());
    }

    #[test]
    fn vacuum_lock_relation() {
        let p = two_level();
        let dc = dispersive_constants(&p).unwrap();
        let cal = DriveCalibration::new(&p, 300e-9).unwrap();
        let s = build_schedule(&cal.vacuum_lock(100e-9), &dc).unwrap();
        let seg = s.segments[0];
        let lhs = I * seg.omega_r;
        let rhs = seg.omega_q * dc.chi / p.g;
        assert!((lhs - rhs).norm() < 1e-9 * rhs.norm());

        let mut flat = p.clone();
        flat.g = 0.0;
        let dc0 = dispersive_constants(&flat).unwrap();
        assert!(build_schedule(&cal.vacuum_lock(100e-9), &dc0).is_err());
    }

    #[test]
    fn multichannel_power_offsets() {
        let cal = DriveCalibration::new(&SystemParams::reference_sample(), 300e-9).unwrap();
        let m = cal.multichannel(1e-7);
        assert!((20.0 * (m.omega_r_mag / cal.omega_r_ref).log10() + 2.0).abs() < 1e-12);
        assert!((20.0 * (m.omega_q_mag / cal.omega_q_ref).log10() + 1.0).abs() < 1e-12);
        // Leakage-budget drive is about 2π × 40 MHz for the reference sample.
        assert!((cal.omega_q_ref / TWO_PI / 1e6 - 40.0).abs() < 1.0);
        let imp = cal.imprecise_phase(1e-7);
        assert!((imp.phi_r - m.phi_r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn reference_drive_gives_target_photons() {
        let p = two_level();
        let dc = dispersive_constants(&p).unwrap();
        let cal = DriveCalibration::new(&p, 300e-9).unwrap();
        let model = SectorModel::new(&dc, p.kappa());
        let a = model.evolve(
            Qubit::Ground,
            ZERO,
            C64::new(cal.omega_r_ref, 0.0),
            ZERO,
            100.0 / p.kappa(),
        );
        assert!((a.norm_sqr() - REFERENCE_PHOTONS).abs() < 1e-9);
    }

    #[test]
    fn reset_tail_layout() {
        let p = two_level();
        let dc = dispersive_constants(&p).unwrap();
        let cal = DriveCalibration::new(&p, 300e-9).unwrap();
        let mut spec = cal.unconditional_reset(100e-9, dc.chi);
        let tail = spec.reset_tail.as_mut().unwrap();
        tail.final_displacement = C64::new(0.5, -0.25);
        let s = build_schedule(&spec, &dc).unwrap();
        assert_eq!(s.segments.len(), 3);
        assert_eq!(s.segments[1].omega_q, -spec.omega_q());
        assert_eq!(s.segments[1].omega_r, ZERO);
        assert!((s.segments[1].duration - PI / dc.chi.abs()).abs() < 1e-18);
        let d = s.segments[2];
        assert!((d.omega_r * d.duration - C64::new(0.5, -0.25)).norm() < 1e-12);
        assert_eq!(d.omega_q, ZERO);
    }

    #[test]
    fn nominal_hold_for_measured_shift() {
        let t = ResetTail::nominal(-TWO_PI * 1.6e6);
        assert!((t.flip_duration - 312.5e-9).abs() < 1e-12);
    }
}
