//! Closed-form two-level dispersive results.
//!
//! With constant drives the resonator amplitude obeys
//! `α̇ = Ω_r + s·iχ(α − α_vo) − (κ/2)α`, with `s = +1` for g and `−1` for e
//! and `α_vo = −Ω_q/g`. Nothing here touches the Hamiltonian builders, so the
//! numerics can be checked against it independently.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::{C64, I};
use crate::system::Qubit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticParams {
    pub omega_r: C64,
    pub omega_q: C64,
    pub chi: f64,
    pub g: f64,
    pub kappa: f64,
}

impl AnalyticParams {
    pub fn new(omega_r: C64, omega_q: C64, chi: f64, g: f64, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(invalid(
                "kappa",
                format!("must be non-negative, got {kappa}"),
            ));
        }
        if g == 0.0 || !g.is_finite() {
            return Err(invalid("g", "must be finite and non-zero"));
        }
        if !chi.is_finite() {
            return Err(invalid("chi", "must be finite"));
        }
        Ok(Self {
            omega_r,
            omega_q,
            chi,
            g,
            kappa,
        })
    }

    pub fn virtual_origin(&self) -> C64 {
        -self.omega_q / self.g
    }

    /// Decay/rotation exponent `λ = s·iχ − κ/2`.
    fn exponent(&self, q: Qubit) -> C64 {
        I * (q.sign() * self.chi) - self.kappa / 2.0
    }

    /// Constant term of the linear ODE, `Ω_r − s·iχ α_vo`.
    fn source(&self, q: Qubit) -> C64 {
        self.omega_r - I * (q.sign() * self.chi) * self.virtual_origin()
    }
}

/// `α_vo = −Ω_q/g`.
pub fn virtual_origin(omega_q: C64, g: f64) -> Result<C64> {
    if g == 0.0 {
        return Err(invalid("g", "virtual origin −Ω_q/g needs g ≠ 0"));
    }
    Ok(-omega_q / g)
}

/// Right-hand side of the amplitude equation.
pub fn ode_rhs(p: &AnalyticParams, q: Qubit, alpha: C64) -> C64 {
    p.omega_r + I * (q.sign() * p.chi) * (alpha - p.virtual_origin()) - alpha * (p.kappa / 2.0)
}

/// `(e^z − 1)/z`, continuous through z = 0.
fn phi1(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `α(t)` for a resonator starting in vacuum:
/// `(iΩ_r ∓ Ω_qχ/g)/(iκ/2 ± χ)·[1 − exp(±iχt − κt/2)]`.
///
/// Written as `src·t·φ₁(λt)` so the undamped, unshifted limit returns `Ω_r t`.
pub fn analytic_trajectory(p: &AnalyticParams, q: Qubit, t: f64) -> C64 {
    let lambda = p.exponent(q);
    p.source(q) * t * phi1(lambda * t)
}

/// `α^s = (iΩ_r ∓ Ω_qχ/g)/(iκ/2 ± χ)`.
pub fn steady_state(p: &AnalyticParams, q: Qubit) -> Result<C64> {
    let s = q.sign();
    let den = I * (p.kappa / 2.0) + s * p.chi;
    if den.norm() == 0.0 {
        return Err(Error::Singularity(
            "iκ/2 ± χ = 0: no steady state without damping or dispersive shift".into(),
        ));
    }
    Ok((I * p.omega_r - s * p.omega_q * p.chi / p.g) / den)
}

/// Locus of the steady state as `arg Ω_q` sweeps a full turn at fixed `|Ω_q|`:
/// center `iΩ_r/(iκ/2 ± χ)`, radius `|Ω_qχ/g|/|iκ/2 ± χ|`.
pub fn steady_state_circle(
    omega_q_mag: f64,
    omega_r: C64,
    chi: f64,
    g: f64,
    kappa: f64,
    q: Qubit,
) -> Result<(C64, f64)> {
    if g == 0.0 {
        return Err(invalid("g", "must be non-zero"));
    }
    let den = I * (kappa / 2.0) + q.sign() * chi;
    if den.norm() == 0.0 {
        return Err(Error::Singularity("iκ/2 ± χ = 0".into()));
    }
    Ok((
        I * omega_r / den,
        (omega_q_mag * chi / g).abs() / den.norm(),
    ))
}

/// Transmon dispersive shift `g²α/[Δ(Δ+α)]` from coupling, detuning and
/// anharmonicity. Reduces to `g²/Δ` as α → ∞.
pub fn predicted_chi(g: f64, delta: f64, anharmonicity: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::SingularDetuning("Δ = 0".into()));
    }
    if delta + anharmonicity == 0.0 {
        return Err(Error::SingularDetuning("Δ + α = 0".into()));
    }
    Ok(g * g * anharmonicity / (delta * (delta + anharmonicity)))
}

/// Initial rate at which the g and e branches separate: `2|Ω_q||χ|/|g|`.
pub fn initial_separation_speed(omega_q: C64, chi: f64, g: f64) -> f64 {
    2.0 * omega_q.norm() * chi.abs() / g.abs()
}
