//! Physical parameters and Hamiltonian builders.
//!
//! All frequencies are angular (rad/s) and all Hamiltonians are returned
//! divided by ħ. The joint basis is transmon ⊗ resonator.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::{ComplexMatrix, C64, I, ZERO};

pub const TWO_PI: f64 = 2.0 * PI;

/// Largest joint Hilbert-space dimension any builder will accept.
pub const MAX_DIM: usize = 4096;

/// Relative size of `g_k / Δ̃_{k+1}` above which the dispersive builders warn.
pub const DISPERSIVE_WARN_RATIO: f64 = 0.2;

/// Characterized sample values, as ordinary frequencies (Hz) unless noted.
pub mod reference {
    pub const QUBIT_FREQUENCY_HZ: f64 = 7.86e9;
    pub const CHARGING_ENERGY_HZ: f64 = 264e6;
    pub const JOSEPHSON_ENERGY_HZ: f64 = 34e9;
    /// Energy decay time from the parameter table (s).
    pub const T1_TABLE_S: f64 = 3.5e-6;
    /// Energy decay time quoted with the readout measurements (s).
    pub const T1_QUOTED_S: f64 = 3.0e-6;
    pub const T2_RAMSEY_S: f64 = 3.0e-6;
    pub const EFFECTIVE_TEMPERATURE_K: f64 = 0.073;
    pub const COUPLING_HZ: f64 = 130e6;
    pub const RESONATOR_FREQUENCY_HZ: f64 = 6.02e9;
    pub const KAPPA_EXTERNAL_HZ: f64 = 1.5e6;
    pub const KAPPA_INTERNAL_HZ: f64 = 0.5e6;
    /// Measured dispersive shift χ/2π.
    pub const MEASURED_CHI_HZ: f64 = -1.6e6;
    /// Thermal excited-state population.
    pub const THERMAL_POPULATION: f64 = 0.006;
    pub const N_TRANSMON: usize = 4;
    pub const N_FOCK: usize = 30;
}

/// Qubit preparation label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl Qubit {
    pub const BOTH: [Qubit; 2] = [Qubit::Ground, Qubit::Excited];

    pub fn level(self) -> usize {
        match self {
            Qubit::Ground => 0,
            Qubit::Excited => 1,
        }
    }

    /// +1 for g, −1 for e. The σ_z convention used throughout is |g⟩⟨g| − |e⟩⟨e|.
    pub fn sign(self) -> f64 {
        match self {
            Qubit::Ground => 1.0,
            Qubit::Excited => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Qubit::Ground => "g",
            Qubit::Excited => "e",
        }
    }

    pub fn other(self) -> Qubit {
        match self {
            Qubit::Ground => Qubit::Excited,
            Qubit::Excited => Qubit::Ground,
        }
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Physical constants of the transmon–resonator system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Coupling g = g₀.
    pub g: f64,
    pub omega_r: f64,
    pub omega_d: f64,
    /// Δ_k = ω_k − kω_r for k = 0..n_transmon, with Δ₀ = 0.
    pub level_detunings: Vec<f64>,
    /// α = −E_c/ħ.
    pub anharmonicity: f64,
    pub kappa_i: f64,
    pub kappa_x: f64,
    pub gamma_1: f64,
    pub n_transmon: usize,
    pub n_fock: usize,
}

impl SystemParams {
    /// Builds a transmon with Δ_k = kΔ + αk(k−1)/2 and the default drive frequency.
    #[allow(clippy::too_many_arguments)]
    pub fn transmon(
        g: f64,
        omega_r: f64,
        omega_q: f64,
        anharmonicity: f64,
        kappa_i: f64,
        kappa_x: f64,
        n_transmon: usize,
        n_fock: usize,
    ) -> Result<Self> {
        let delta = omega_q - omega_r;
        let mut p = Self {
            g,
            omega_r,
            omega_d: omega_r,
            level_detunings: transmon_ladder(delta, anharmonicity, n_transmon),
            anharmonicity,
            kappa_i,
            kappa_x,
            gamma_1: 0.0,
            n_transmon,
            n_fock,
        };
        p.validate()?;
        p.omega_d = default_drive_frequency(&p)?;
        Ok(p)
    }

    /// The characterized sample with 4 transmon and 30 Fock levels.
    pub fn reference_sample() -> Self {
        use reference::*;
        Self::transmon(
            TWO_PI * COUPLING_HZ,
            TWO_PI * RESONATOR_FREQUENCY_HZ,
            TWO_PI * QUBIT_FREQUENCY_HZ,
            -TWO_PI * CHARGING_ENERGY_HZ,
            TWO_PI * KAPPA_INTERNAL_HZ,
            TWO_PI * KAPPA_EXTERNAL_HZ,
            N_TRANSMON,
            N_FOCK,
        )
        .expect("reference parameters are valid")
    }

    /// Same physics with a different truncation; the drive frequency is reset
    /// to the default for the new level count.
    pub fn with_truncation(&self, n_transmon: usize, n_fock: usize) -> Result<Self> {
        let mut p = self.clone();
        p.n_transmon = n_transmon;
        p.n_fock = n_fock;
        p.level_detunings = transmon_ladder(self.delta(), self.anharmonicity, n_transmon);
        p.validate()?;
        p.omega_d = default_drive_frequency(&p)?;
        Ok(p)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_x
    }

    pub fn dim(&self) -> usize {
        self.n_transmon * self.n_fock
    }

    /// Qubit–resonator detuning Δ = Δ₁.
    pub fn delta(&self) -> f64 {
        self.level_detunings.get(1).copied().unwrap_or(0.0)
    }

    pub fn omega_q(&self) -> f64 {
        self.omega_r + self.delta()
    }

    /// δ_r = ω_r − ω_d.
    pub fn delta_r(&self) -> f64 {
        self.omega_r - self.omega_d
    }

    /// Δ̃_k = Δ_k + k(ω_r − ω_d) = ω_k − kω_d.
    pub fn shifted_detunings(&self) -> Vec<f64> {
        let dr = self.delta_r();
        self.level_detunings
            .iter()
            .enumerate()
            .map(|(k, d)| d + k as f64 * dr)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_transmon < 2 {
            return Err(Error::InvalidDimension {
                what: "n_transmon",
                value: self.n_transmon,
            });
        }
        if self.n_fock < 2 {
            return Err(Error::InvalidDimension {
                what: "n_fock",
                value: self.n_fock,
            });
        }
        check_dim(self.n_transmon, self.n_fock)?;
        if self.level_detunings.len() != self.n_transmon {
            return Err(invalid(
                "level_detunings",
                format!(
                    "expected {} entries, found {}",
                    self.n_transmon,
                    self.level_detunings.len()
                ),
            ));
        }
        if self.level_detunings[0] != 0.0 {
            return Err(invalid("level_detunings", "Δ₀ must be 0"));
        }
        for (name, v) in [
            ("g", self.g),
            ("omega_r", self.omega_r),
            ("omega_d", self.omega_d),
            ("anharmonicity", self.anharmonicity),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("kappa_i", self.kappa_i),
            ("kappa_x", self.kappa_x),
            ("gamma_1", self.gamma_1),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(
                    name,
                    format!("must be a non-negative rate, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

fn transmon_ladder(delta: f64, anharmonicity: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            k * delta + anharmonicity * k * (k - 1.0) / 2.0
        })
        .collect()
}

pub(crate) fn check_dim(levels: usize, n_fock: usize) -> Result<()> {
    let dim = levels.saturating_mul(n_fock);
    if dim > MAX_DIM {
        return Err(Error::DimensionOverflow {
            dim,
            limit: MAX_DIM,
        });
    }
    Ok(())
}

/// `g_k = g√(k+1)` and `λ_k = √(k+1)` for k = 0..n_transmon−1.
pub fn coupling_ladder(params: &SystemParams) -> (Vec<f64>, Vec<f64>) {
    let lambda: Vec<f64> = (0..params.n_transmon.saturating_sub(1))
        .map(|k| ((k + 1) as f64).sqrt())
        .collect();
    let g = lambda.iter().map(|l| params.g * l).collect();
    (g, lambda)
}

/// Rotating-frame Hamiltonian at the drive frequency, within the RWA:
///
/// `H = δ_r a†a + Σ Δ̃_k|k⟩⟨k| + [iΩ_r a† + Σ (g_k a†|k⟩⟨k+1| + Ω_q λ_k|k+1⟩⟨k|) + h.c.]`
pub fn build_rotating_hamiltonian(
    params: &SystemParams,
    omega_q: C64,
    omega_r: C64,
) -> Result<ComplexMatrix> {
    params.validate()?;
    let (nt, nf) = (params.n_transmon, params.n_fock);
    let idx = |k: usize, n: usize| k * nf + n;
    let dt = params.shifted_detunings();
    let (gk, lk) = coupling_ladder(params);
    let dr = params.delta_r();
    let mut h = ComplexMatrix::zeros(nt * nf, nt * nf);

    for k in 0..nt {
        for n in 0..nf {
            h[(idx(k, n), idx(k, n))] = C64::new(dt[k] + dr * n as f64, 0.0);
        }
    }
    for k in 0..nt {
        for n in 0..nf - 1 {
            let amp = ((n + 1) as f64).sqrt();
            h[(idx(k, n + 1), idx(k, n))] += I * omega_r * amp;
            h[(idx(k, n), idx(k, n + 1))] += (I * omega_r * amp).conj();
        }
    }
    for k in 0..nt - 1 {
        for n in 0..nf {
            // g_k a† |k⟩⟨k+1| : |k+1, n⟩ → |k, n+1⟩
            if n + 1 < nf {
                let v = C64::new(gk[k] * ((n + 1) as f64).sqrt(), 0.0);
                h[(idx(k, n + 1), idx(k + 1, n))] += v;
                h[(idx(k + 1, n), idx(k, n + 1))] += v;
            }
            let v = omega_q * lk[k];
            h[(idx(k + 1, n), idx(k, n))] += v;
            h[(idx(k, n), idx(k + 1, n))] += v.conj();
        }
    }
    Ok(h)
}

/// Lab-frame Hamiltonian at time `t`, with real drive waveforms
/// `Ω̃(t) = Re Ω cos(ω_d t) + Im Ω sin(ω_d t)`.
///
/// Only used to check the rotating-frame construction; evolution always runs
/// in the rotating frame.
pub fn build_lab_hamiltonian(
    params: &SystemParams,
    omega_q: C64,
    omega_r: C64,
    t: f64,
) -> Result<ComplexMatrix> {
    params.validate()?;
    let (nt, nf) = (params.n_transmon, params.n_fock);
    let idx = |k: usize, n: usize| k * nf + n;
    let (gk, lk) = coupling_ladder(params);
    let (s, c) = (params.omega_d * t).sin_cos();
    let wq = omega_q.re * c + omega_q.im * s;
    let wr = omega_r.re * c + omega_r.im * s;
    let mut h = ComplexMatrix::zeros(nt * nf, nt * nf);

    for k in 0..nt {
        let omega_k = k as f64 * params.omega_r + params.level_detunings[k];
        for n in 0..nf {
            h[(idx(k, n), idx(k, n))] = C64::new(omega_k + params.omega_r * n as f64, 0.0);
        }
    }
    for k in 0..nt {
        for n in 0..nf - 1 {
            // 2iΩ̃_r (a† − a)
            let v = I * (2.0 * wr * ((n + 1) as f64).sqrt());
            h[(idx(k, n + 1), idx(k, n))] += v;
            h[(idx(k, n), idx(k, n + 1))] -= v;
        }
    }
    for k in 0..nt - 1 {
        for n in 0..nf {
            // g_k (a† + a)(|k⟩⟨k+1| + |k+1⟩⟨k|)
            if n + 1 < nf {
                let v = C64::new(gk[k] * ((n + 1) as f64).sqrt(), 0.0);
                for (a, b) in [
                    (idx(k, n + 1), idx(k + 1, n)),
                    (idx(k + 1, n + 1), idx(k, n)),
                ] {
                    h[(a, b)] += v;
                    h[(b, a)] += v;
                }
            }
            let v = C64::new(2.0 * wq * lk[k], 0.0);
            h[(idx(k + 1, n), idx(k, n))] += v;
            h[(idx(k, n), idx(k + 1, n))] += v;
        }
    }
    Ok(h)
}

/// Diagonal of `U = exp[iω_d t (a†a + Σ k|k⟩⟨k|)]`, the rotating-frame map.
pub fn rotating_frame_phases(params: &SystemParams, t: f64) -> Vec<C64> {
    let nf = params.n_fock;
    (0..params.n_transmon * nf)
        .map(|i| {
            let excitations = (i / nf + i % nf) as f64;
            C64::from_polar(1.0, params.omega_d * t * excitations)
        })
        .collect()
}

/// Constants of the second-order dispersive expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersiveConstants {
    /// χ₀ = g₀²/Δ̃₁.
    pub chi0: f64,
    /// χ₁ = g₁²/(Δ̃₂ − Δ̃₁); zero in the two-level reduction.
    pub chi1: f64,
    /// χ = χ₀ − χ₁/2.
    pub chi: f64,
    pub delta_tilde: Vec<f64>,
    pub g0: f64,
    pub g1: f64,
    pub delta_r: f64,
    /// Number of transmon levels kept (2 or 3).
    pub levels: usize,
    /// `|g_k/Δ̃_{k+1}|` for each kept coupling.
    pub validity_ratios: Vec<f64>,
}

impl DispersiveConstants {
    /// Qubit-sector energies `(E_g, E_e, E_f)` truncated to `levels`.
    pub fn sector_energies(&self) -> Vec<f64> {
        let mut e = vec![0.0, self.delta_tilde[1] + self.chi0];
        if self.levels == 3 {
            e.push(self.delta_tilde[2] + self.chi1);
        }
        e
    }

    /// Coefficient of a†a in each qubit sector.
    pub fn number_coefficients(&self) -> Vec<f64> {
        let dr = self.delta_r;
        let mut c = vec![dr - self.chi0, dr + self.chi0 - self.chi1];
        if self.levels == 3 {
            c.push(dr + self.chi1);
        }
        c
    }

    /// Per-sector slope `s_j` of the qubit-drive contribution `Ω_q s_j a†`.
    pub fn qubit_drive_slopes(&self) -> Vec<f64> {
        let r0 = ratio(self.chi0, self.g0);
        let r1 = ratio(self.chi1, self.g0);
        let mut s = vec![-r0, r0 - r1];
        if self.levels == 3 {
            s.push(r1);
        }
        s
    }

    /// Coefficient of a† in each sector for the given drives.
    pub fn resonator_drive_terms(&self, omega_q: C64, omega_r: C64) -> Vec<C64> {
        self.qubit_drive_slopes()
            .into_iter()
            .map(|s| I * omega_r + omega_q * s)
            .collect()
    }

    /// `⟨j+1|H|j⟩` for the qubit transitions kept.
    pub fn qubit_couplings(&self, omega_q: C64, omega_r: C64) -> Vec<C64> {
        let mut c = vec![omega_q + I * omega_r * ratio(self.chi0, self.g0)];
        if self.levels == 3 {
            c.push(omega_q * SQRT_2 + I * omega_r * ratio(self.chi1, self.g1));
        }
        c
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Dispersive constants with up to three transmon levels.
pub fn dispersive_constants(params: &SystemParams) -> Result<DispersiveConstants> {
    dispersive_constants_for(params, params.n_transmon.min(3))
}

/// Dispersive constants with `levels` ∈ {2, 3}; two levels sets g₁ = χ₁ = 0.
pub fn dispersive_constants_for(
    params: &SystemParams,
    levels: usize,
) -> Result<DispersiveConstants> {
    if !(2..=3).contains(&levels) || levels > params.n_transmon {
        return Err(Error::InvalidDimension {
            what: "dispersive levels",
            value: levels,
        });
    }
    let dt = params.shifted_detunings();
    let (gk, _) = coupling_ladder(params);
    if dt[1] == 0.0 {
        return Err(Error::SingularDetuning(
            "Δ̃₁ = 0: the qubit is resonant with the drive frame, χ₀ = g₀²/Δ̃₁ diverges".into(),
        ));
    }
    let g0 = gk[0];
    let chi0 = g0 * g0 / dt[1];
    let mut validity = vec![(g0 / dt[1]).abs()];
    let (g1, chi1) = if levels == 3 {
        let d21 = dt[2] - dt[1];
        if d21 == 0.0 {
            return Err(Error::SingularDetuning(
                "Δ̃₂ = Δ̃₁: χ₁ = g₁²/(Δ̃₂ − Δ̃₁) diverges".into(),
            ));
        }
        if dt[2] != 0.0 {
            validity.push((gk[1] / dt[2]).abs());
        } else {
            validity.push(f64::INFINITY);
        }
        (gk[1], gk[1] * gk[1] / d21)
    } else {
        (0.0, 0.0)
    };
    for (k, r) in validity.iter().enumerate() {
        if *r > DISPERSIVE_WARN_RATIO {
            warn!(
                "dispersive expansion questionable: |g_{k}/Δ̃_{}| = {r:.3}",
                k + 1
            );
        }
    }
    Ok(DispersiveConstants {
        chi0,
        chi1,
        chi: chi0 - chi1 / 2.0,
        delta_tilde: dt,
        g0,
        g1,
        delta_r: params.delta_r(),
        levels,
        validity_ratios: validity,
    })
}

/// Default drive frequency `ω_d = ω_r − χ₁/2`, so that the g and e branches
/// rotate at −χ and +χ. Solved self-consistently since χ₁ depends on ω_d.
pub fn default_drive_frequency(params: &SystemParams) -> Result<f64> {
    if params.n_transmon < 3 {
        return Ok(params.omega_r);
    }
    let mut p = params.clone();
    p.omega_d = p.omega_r;
    for _ in 0..50 {
        let (gk, _) = coupling_ladder(&p);
        let dt = p.shifted_detunings();
        let d21 = dt[2] - dt[1];
        if d21 == 0.0 {
            return Err(Error::SingularDetuning("Δ̃₂ = Δ̃₁".into()));
        }
        let next = p.omega_r - gk[1] * gk[1] / d21 / 2.0;
        let done = (next - p.omega_d).abs() <= 1e-12 * p.omega_r.abs().max(1.0);
        p.omega_d = next;
        if done {
            break;
        }
    }
    Ok(p.omega_d)
}

/// Dispersive Hamiltonian on `levels` transmon levels ⊗ Fock space.
pub fn build_dispersive_hamiltonian(
    params: &SystemParams,
    omega_q: C64,
    omega_r: C64,
    levels: usize,
) -> Result<ComplexMatrix> {
    build_shifted_dispersive(params, omega_q, omega_r, levels, ZERO)
}

/// The dispersive Hamiltonian written in terms of `b = a − β`.
///
/// With `β = −Ω_q/g` this differs from [`build_displaced_hamiltonian`] only by
/// a multiple of the identity.
pub fn build_shifted_dispersive(
    params: &SystemParams,
    omega_q: C64,
    omega_r: C64,
    levels: usize,
    beta: C64,
) -> Result<ComplexMatrix> {
    params.validate()?;
    check_dim(levels, params.n_fock)?;
    let dc = dispersive_constants_for(params, levels)?;
    let e = dc.sector_energies();
    let c = dc.number_coefficients();
    let d = dc.resonator_drive_terms(omega_q, omega_r);
    let constants: Vec<f64> = (0..levels)
        .map(|j| e[j] + c[j] * beta.norm_sqr() + 2.0 * (d[j] * beta.conj()).re)
        .collect();
    let drive: Vec<C64> = (0..levels).map(|j| d[j] + beta * c[j]).collect();
    Ok(assemble_dispersive(
        params.n_fock,
        &constants,
        &c,
        &drive,
        &dc.qubit_couplings(omega_q, omega_r),
    ))
}

/// Dispersive Hamiltonian in the frame displaced by the virtual origin
/// `α_vo = −Ω_q/g`, written term by term.
pub fn build_displaced_hamiltonian(
    params: &SystemParams,
    omega_q: C64,
    omega_r: C64,
    levels: usize,
) -> Result<ComplexMatrix> {
    params.validate()?;
    check_dim(levels, params.n_fock)?;
    if params.g == 0.0 {
        return Err(invalid("g", "virtual origin −Ω_q/g needs g ≠ 0"));
    }
    let dc = dispersive_constants_for(params, levels)?;
    let avo = -omega_q / params.g;
    let a2 = avo.norm_sqr();
    let dt = &dc.delta_tilde;
    let mut constants = vec![dc.chi0 * a2, dt[1] + dc.chi0 - a2 * (dc.chi0 - dc.chi1)];
    let mut couplings = vec![-avo * dc.g0 + I * omega_r * ratio(dc.chi0, dc.g0)];
    if levels == 3 {
        constants.push(dt[2] + dc.chi1 * (1.0 - a2));
        couplings.push(-avo * dc.g1 + I * omega_r * ratio(dc.chi1, dc.g1));
    }
    let c = dc.number_coefficients();
    let drive = vec![I * omega_r + avo * dc.delta_r; levels];
    Ok(assemble_dispersive(
        params.n_fock,
        &constants,
        &c,
        &drive,
        &couplings,
    ))
}

fn assemble_dispersive(
    nf: usize,
    constants: &[f64],
    number: &[f64],
    drive: &[C64],
    couplings: &[C64],
) -> ComplexMatrix {
    let levels = constants.len();
    let idx = |k: usize, n: usize| k * nf + n;
    let mut h = ComplexMatrix::zeros(levels * nf, levels * nf);
    for j in 0..levels {
        for n in 0..nf {
            h[(idx(j, n), idx(j, n))] = C64::new(constants[j] + number[j] * n as f64, 0.0);
            if n + 1 < nf {
                let v = drive[j] * ((n + 1) as f64).sqrt();
                h[(idx(j, n + 1), idx(j, n))] += v;
                h[(idx(j, n), idx(j, n + 1))] += v.conj();
            }
        }
    }
    for (j, v) in couplings.iter().enumerate() {
        for n in 0..nf {
            h[(idx(j + 1, n), idx(j, n))] += *v;
            h[(idx(j, n), idx(j + 1, n))] += v.conj();
        }
    }
    h
}
