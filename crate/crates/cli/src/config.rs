//! Experiment configuration file.
//!
//! Frequencies are ordinary frequencies in Hz throughout the file and are
//! converted to angular frequencies when the core types are built. Drive
//! amplitudes are given as Ω/2π.

use std::path::Path;

use mcread_core::engine::Frame;
use mcread_core::protocols::{DriveCalibration, ProtocolSpec, ResetTail, PRESET_NAMES};
use mcread_core::shots::{NoiseModel, DEFAULT_NOISE_FACTOR};
use mcread_core::system::{dispersive_constants, reference, SystemParams, MAX_DIM, TWO_PI};
use mcread_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub coupling_hz: f64,
    pub resonator_frequency_hz: f64,
    pub qubit_frequency_hz: f64,
    /// E_c/h; the anharmonicity is −E_c.
    pub charging_energy_hz: f64,
    pub josephson_energy_hz: f64,
    pub kappa_internal_hz: f64,
    pub kappa_external_hz: f64,
    /// Overrides the default drive frequency ω_r − χ₁/2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_frequency_hz: Option<f64>,
    pub n_transmon: usize,
    pub n_fock: usize,
    /// Energy decay time used when `qubit_decay` is on.
    pub t1_s: f64,
    /// Decay time quoted alongside the readout data; informational.
    pub t1_quoted_s: f64,
    pub qubit_decay: bool,
    /// Measured dispersive shift, kept for comparison with the prediction.
    pub measured_chi_hz: f64,
    pub thermal_population: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        use reference::*;
        Self {
            coupling_hz: COUPLING_HZ,
            resonator_frequency_hz: RESONATOR_FREQUENCY_HZ,
            qubit_frequency_hz: QUBIT_FREQUENCY_HZ,
            charging_energy_hz: CHARGING_ENERGY_HZ,
            josephson_energy_hz: JOSEPHSON_ENERGY_HZ,
            kappa_internal_hz: KAPPA_INTERNAL_HZ,
            kappa_external_hz: KAPPA_EXTERNAL_HZ,
            drive_frequency_hz: None,
            n_transmon: 3,
            n_fock: 26,
            t1_s: T1_TABLE_S,
            t1_quoted_s: T1_QUOTED_S,
            qubit_decay: false,
            measured_chi_hz: MEASURED_CHI_HZ,
            thermal_population: THERMAL_POPULATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// One of the preset names; magnitudes and phases below override it.
    pub preset: String,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_q_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_r_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_r: Option<f64>,
    #[serde(default)]
    pub rise_time_s: f64,
    /// Window over which the relative drive phase is optimized.
    #[serde(default = "default_horizon")]
    pub phase_horizon_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset: Option<ResetSection>,
}

fn default_duration() -> f64 {
    420e-9
}

fn default_horizon() -> f64 {
    300e-9
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            preset: "multichannel".into(),
            duration_s: default_duration(),
            omega_q_hz: None,
            omega_r_hz: None,
            phi_q: None,
            phi_r: None,
            rise_time_s: 0.0,
            phase_horizon_s: default_horizon(),
            reset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetSection {
    pub flip_duration_s: f64,
    #[serde(default)]
    pub final_displacement_re: f64,
    #[serde(default)]
    pub final_displacement_im: f64,
    #[serde(default = "default_displacement_duration")]
    pub displacement_duration_s: f64,
}

fn default_displacement_duration() -> f64 {
    ResetTail::DEFAULT_DISPLACEMENT_DURATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Amplifier noise factor F ≥ 1 on top of the vacuum variance.
    pub noise_factor: f64,
    /// Explicit per-sample standard deviation; overrides `noise_factor`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_quadrature: Option<f64>,
    pub sample_interval_s: f64,
    pub thermal_eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_prep: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            noise_factor: DEFAULT_NOISE_FACTOR,
            sigma_quadrature: None,
            sample_interval_s: 2e-9,
            thermal_eps: 0.0,
            eps_prep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    pub sample_interval_s: f64,
    pub frame: Frame,
    pub n_shots: usize,
    pub tau_grid_s: Vec<f64>,
    pub seed: u64,
    pub output_dir: String,
    pub histogram_bins: usize,
    pub phase_points: usize,
    /// Tune hold time and displacement before a reset run.
    pub tune_reset: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            dt_s: None,
            sample_interval_s: 2e-9,
            frame: Frame::Dispersive,
            n_shots: 10_000,
            tau_grid_s: (0..8).map(|k| 100e-9 + k as f64 * 320e-9 / 7.0).collect(),
            seed: 0,
            output_dir: "out".into(),
            histogram_bins: 100,
            phase_points: 32,
            tune_reset: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemSection,
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_with_overrides(&text, overrides)
    }

    /// Parses `text`, applies `key=value` overrides on dotted paths, then
    /// validates.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults with overrides applied, for runs without a file.
    pub fn defaults_with_overrides(overrides: &[String]) -> Result<Self, CliError> {
        let text =
            toml::to_string(&Self::default()).map_err(|e| CliError::Config(e.to_string()))?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, reason: &str| {
            Err(CliError::Validation {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        let s = &self.system;
        for (field, v) in [
            ("system.coupling_hz", s.coupling_hz),
            ("system.resonator_frequency_hz", s.resonator_frequency_hz),
            ("system.qubit_frequency_hz", s.qubit_frequency_hz),
            ("system.charging_energy_hz", s.charging_energy_hz),
            ("system.josephson_energy_hz", s.josephson_energy_hz),
            ("system.kappa_internal_hz", s.kappa_internal_hz),
            ("system.kappa_external_hz", s.kappa_external_hz),
            ("system.t1_s", s.t1_s),
            ("system.t1_quoted_s", s.t1_quoted_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(field, "must be a finite non-negative number");
            }
        }
        if s.resonator_frequency_hz == 0.0 || s.qubit_frequency_hz == 0.0 {
            return bad(
                "system.resonator_frequency_hz",
                "frequencies must be positive",
            );
        }
        if s.qubit_decay && s.t1_s <= 0.0 {
            return bad("system.t1_s", "must be positive when qubit_decay is on");
        }
        if s.n_transmon < 2 {
            return bad("system.n_transmon", "must be at least 2");
        }
        if s.n_fock < 2 {
            return bad("system.n_fock", "must be at least 2");
        }
        if s.n_transmon.saturating_mul(s.n_fock) > MAX_DIM {
            return bad("system.n_fock", "n_transmon × n_fock exceeds 4096");
        }
        if !(0.0..1.0).contains(&s.thermal_population) {
            return bad("system.thermal_population", "must lie in [0, 1)");
        }
        if let Some(f) = s.drive_frequency_hz {
            if !(f.is_finite() && f > 0.0) {
                return bad("system.drive_frequency_hz", "must be positive");
            }
        }

        let p = &self.protocol;
        let preset = normalize(&p.preset);
        if !PRESET_NAMES.contains(&preset.as_str()) {
            return bad(
                "protocol.preset",
                &format!(
                    "unknown preset; expected one of {}",
                    PRESET_NAMES.join(", ")
                ),
            );
        }
        if !(p.duration_s.is_finite() && p.duration_s > 0.0) {
            return bad("protocol.duration_s", "must be positive");
        }
        if !(p.phase_horizon_s.is_finite() && p.phase_horizon_s > 0.0) {
            return bad("protocol.phase_horizon_s", "must be positive");
        }
        if !(p.rise_time_s.is_finite() && p.rise_time_s >= 0.0) {
            return bad("protocol.rise_time_s", "must be non-negative");
        }
        for (field, v) in [
            ("protocol.omega_q_hz", p.omega_q_hz),
            ("protocol.omega_r_hz", p.omega_r_hz),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(field, "must be a non-negative magnitude");
                }
            }
        }
        if let Some(r) = &p.reset {
            if !(r.flip_duration_s > 0.0) {
                return bad("protocol.reset.flip_duration_s", "must be positive");
            }
            if !(r.displacement_duration_s > 0.0) {
                return bad("protocol.reset.displacement_duration_s", "must be positive");
            }
        }

        let n = &self.noise;
        if !(n.noise_factor.is_finite() && n.noise_factor >= 1.0) {
            return bad("noise.noise_factor", "must be at least 1");
        }
        if let Some(sig) = n.sigma_quadrature {
            if !(sig.is_finite() && sig > 0.0) {
                return bad("noise.sigma_quadrature", "must be positive");
            }
        }
        if !(n.sample_interval_s.is_finite() && n.sample_interval_s > 0.0) {
            return bad("noise.sample_interval_s", "must be positive");
        }
        if !(0.0..1.0).contains(&n.thermal_eps) {
            return bad("noise.thermal_eps", "must lie in [0, 1)");
        }
        if let Some(e) = n.eps_prep {
            if !(0.0..1.0).contains(&e) {
                return bad("noise.eps_prep", "must lie in [0, 1)");
            }
        }

        let r = &self.run;
        if let Some(dt) = r.dt_s {
            if !(dt.is_finite() && dt > 0.0) {
                return bad("run.dt_s", "must be positive");
            }
        }
        if !(r.sample_interval_s.is_finite() && r.sample_interval_s > 0.0) {
            return bad("run.sample_interval_s", "must be positive");
        }
        if r.n_shots == 0 {
            return bad("run.n_shots", "must be at least 1");
        }
        if r.tau_grid_s.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("run.tau_grid_s", "entries must be positive");
        }
        if r.histogram_bins == 0 {
            return bad("run.histogram_bins", "must be at least 1");
        }
        if r.phase_points == 0 {
            return bad("run.phase_points", "must be at least 1");
        }
        Ok(())
    }

    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        let s = &self.system;
        let mut p = SystemParams::transmon(
            TWO_PI * s.coupling_hz,
            TWO_PI * s.resonator_frequency_hz,
            TWO_PI * s.qubit_frequency_hz,
            -TWO_PI * s.charging_energy_hz,
            TWO_PI * s.kappa_internal_hz,
            TWO_PI * s.kappa_external_hz,
            s.n_transmon,
            s.n_fock,
        )?;
        if let Some(f) = s.drive_frequency_hz {
            p.omega_d = TWO_PI * f;
        }
        if s.qubit_decay {
            p.gamma_1 = 1.0 / s.t1_s;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn calibration(&self, params: &SystemParams) -> Result<DriveCalibration, CliError> {
        Ok(DriveCalibration::new(
            params,
            self.protocol.phase_horizon_s,
        )?)
    }

    /// The configured protocol: preset values with any explicit overrides.
    pub fn protocol_spec(&self, params: &SystemParams) -> Result<ProtocolSpec, CliError> {
        let p = &self.protocol;
        let cal = self.calibration(params)?;
        let chi = dispersive_constants(params)?.chi;
        let mut spec = cal.preset(&p.preset, p.duration_s, chi)?;
        if let Some(v) = p.omega_q_hz {
            spec.omega_q_mag = TWO_PI * v;
        }
        if let Some(v) = p.omega_r_hz {
            spec.omega_r_mag = TWO_PI * v;
        }
        if let Some(v) = p.phi_q {
            spec.phi_q = v;
        }
        if let Some(v) = p.phi_r {
            spec.phi_r = v;
        }
        spec.rise_time = p.rise_time_s;
        if let Some(r) = &p.reset {
            spec.reset_tail = Some(ResetTail {
                flip_duration: r.flip_duration_s,
                final_displacement: C64::new(r.final_displacement_re, r.final_displacement_im),
                displacement_duration: r.displacement_duration_s,
            });
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn noise_model(&self) -> Result<NoiseModel, CliError> {
        let n = &self.noise;
        Ok(match n.sigma_quadrature {
            Some(s) => NoiseModel::new(s, n.sample_interval_s, self.run.seed)?,
            None => NoiseModel::calibrated(n.noise_factor, n.sample_interval_s, self.run.seed)?,
        })
    }
}

fn normalize(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('-', "_")
}

/// Sets `a.b.c = value` in a TOML table. The value is read as a TOML literal
/// and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!(
            "override key `{path}` is malformed"
        )));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override key `{path}`: `{k}` is not a section"))
        })?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
