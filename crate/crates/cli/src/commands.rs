//! Subcommand implementations. Each writes its artifacts into a fresh run
//! directory and returns the manifest.

use std::io::Read;
use std::path::{Path, PathBuf};

use mcread_core::analytic::{
    analytic_trajectory, initial_separation_speed, predicted_chi, steady_state,
    steady_state_circle, virtual_origin,
};
use mcread_core::engine::{leakage, trajectory_csv, EvolveOptions, Trajectory};
use mcread_core::fit::{
    effective_temperature, fit_rb_decay, fit_two_gaussian, gate_error, prep_error,
};
use mcread_core::protocols::{
    build_schedule, run_protocol, tune_reset, ProtocolKind, ProtocolSpec, ResetTail,
    SeparationDiagnostics,
};
use mcread_core::shots::{
    assign, assignment_error, error_vs_time, histogram, histogram_csv, matched_weights,
    predicted_error, project_onto_axis, references, sample_shots, shots_csv, CampaignSettings,
};
use mcread_core::system::{dispersive_constants, SystemParams, TWO_PI};
use mcread_core::{AnalyticParams, Qubit, C64};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{numeric_csv, sha256_hex, Manifest, RunDir};

#[derive(Debug, Clone, PartialEq)]
pub enum FitKind {
    /// Histogram fit of single shots read from a CSV (stdin when `None`).
    TwoGaussian { input: Option<PathBuf> },
    /// `A p^L + B` from a CSV with columns `length,survival`.
    Rb { input: Option<PathBuf> },
    /// Gate and preparation error arithmetic.
    GateError {
        p_ref: f64,
        p_gate: f64,
        eps_th: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Simulate,
    Analytic,
    Shots,
    SweepPhase,
    Reset,
    Fit(FitKind),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analytic => "analytic",
            Command::Shots => "shots",
            Command::SweepPhase => "sweep-phase",
            Command::Reset => "reset",
            Command::Fit(_) => "fit",
        }
    }
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Short machine-readable summary printed on stdout.
    pub summary: serde_json::Value,
}

pub fn run_command(cmd: &Command, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let mut out = RunDir::create(cfg, cmd.name())?;
    let summary = match cmd {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Analytic => analytic(cfg, &mut out)?,
        Command::Shots => shots(cfg, &mut out)?,
        Command::SweepPhase => sweep_phase(cfg, &mut out)?,
        Command::Reset => reset(cfg, &mut out)?,
        Command::Fit(kind) => fit(cfg, kind, &mut out)?,
    };
    let (dir, manifest) = out.finish()?;
    Ok(RunOutput {
        dir,
        manifest,
        summary,
    })
}

fn evolve_options(cfg: &ExperimentConfig) -> EvolveOptions {
    EvolveOptions {
        dt: cfg.run.dt_s,
        sample_interval: cfg.run.sample_interval_s,
        frame: cfg.run.frame,
        allow_large_dt: false,
        check_positivity: false,
    }
}

fn engine_report(t: &Trajectory) -> serde_json::Value {
    json!({
        "diagnostics": t.diagnostics,
        "warnings": t.warnings,
        "leakage": leakage(t).ok(),
    })
}

fn separation_csv(d: &SeparationDiagnostics) -> String {
    numeric_csv(
        &["t_s", "separation"],
        d.times.iter().zip(&d.separation).map(|(t, s)| vec![*t, *s]),
    )
}

fn write_pair(
    out: &mut RunDir,
    g: &Trajectory,
    e: &Trajectory,
    d: &SeparationDiagnostics,
) -> Result<(), CliError> {
    out.write_text("trajectory_g.csv", &trajectory_csv(g))?;
    out.write_text("trajectory_e.csv", &trajectory_csv(e))?;
    out.write_text("separation.csv", &separation_csv(d))?;
    Ok(())
}

fn separation_summary(d: &SeparationDiagnostics) -> serde_json::Value {
    json!({
        "initial_rate_per_s": d.initial_rate,
        "max_separation": d.max_separation,
        "time_of_max_s": d.time_of_max,
    })
}

/// Resolves a reset preset: tunes it unless the configuration pins the tail.
fn resolved_spec(
    cfg: &ExperimentConfig,
    params: &SystemParams,
) -> Result<(ProtocolSpec, Option<serde_json::Value>), CliError> {
    let spec = cfg.protocol_spec(params)?;
    if spec.kind == ProtocolKind::UnconditionalReset
        && cfg.protocol.reset.is_none()
        && cfg.run.tune_reset
    {
        let t = tune_reset(params, &spec, &evolve_options(cfg))?;
        let report = json!({
            "nominal_hold_s": t.nominal_hold,
            "tuned_hold_s": t.spec.reset_tail.map(|r| r.flip_duration),
            "merge_gap": t.merge_gap,
            "merge_amplitude": t.merge_amplitude,
            "residual": t.residual,
        });
        return Ok((t.spec, Some(report)));
    }
    Ok((spec, None))
}

fn simulate(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let params = cfg.system_params()?;
    let (spec, tuning) = resolved_spec(cfg, &params)?;
    let (g, e, d) = run_protocol(&params, &spec, &evolve_options(cfg))?;
    write_pair(out, &g, &e, &d)?;
    let report = json!({
        "protocol": spec,
        "separation": separation_summary(&d),
        "reset_tuning": tuning,
        "g": engine_report(&g),
        "e": engine_report(&e),
    });
    out.write_json("diagnostics.json", &report)?;
    Ok(json!({ "protocol": spec.kind, "separation": separation_summary(&d) }))
}

/// Two-level closed-form amplitudes for the configured drives.
fn analytic(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let params = cfg.system_params()?;
    let dc = dispersive_constants(&params)?;
    let spec = cfg.protocol_spec(&params)?;
    let mut first = build_schedule(&spec, &dc)?.segments[0];
    if spec.kind == ProtocolKind::VacuumLock {
        // The two-level model locks at iΩ_r = Ω_q χ/g with its own χ.
        first.omega_r = -C64::new(0.0, 1.0) * first.omega_q * dc.chi / params.g;
    }
    let ap = AnalyticParams::new(
        first.omega_r,
        first.omega_q,
        dc.chi,
        params.g,
        params.kappa(),
    )?;
    let dt = cfg.run.sample_interval_s;
    let n = (spec.duration / dt + 1e-9).floor() as usize;
    let rows = (0..=n).map(|k| {
        let t = k as f64 * dt;
        let a = analytic_trajectory(&ap, Qubit::Ground, t);
        let b = analytic_trajectory(&ap, Qubit::Excited, t);
        vec![t, a.re, a.im, b.re, b.im]
    });
    out.write_text(
        "analytic.csv",
        &numeric_csv(
            &[
                "t_s",
                "re_alpha_g",
                "im_alpha_g",
                "re_alpha_e",
                "im_alpha_e",
            ],
            rows,
        ),
    )?;
    let chi_pred = predicted_chi(params.g, params.delta(), params.anharmonicity)?;
    let ss_g = steady_state(&ap, Qubit::Ground)?;
    let ss_e = steady_state(&ap, Qubit::Excited)?;
    let report = json!({
        "chi_hz": dc.chi / TWO_PI,
        "chi0_hz": dc.chi0 / TWO_PI,
        "chi1_hz": dc.chi1 / TWO_PI,
        "predicted_chi_hz": chi_pred / TWO_PI,
        "measured_chi_hz": cfg.system.measured_chi_hz,
        "virtual_origin": virtual_origin(first.omega_q, params.g)?,
        "steady_state_g": ss_g,
        "steady_state_e": ss_e,
        "initial_separation_speed_per_s": initial_separation_speed(first.omega_q, dc.chi, params.g),
    });
    out.write_json("analytic.json", &report)?;
    Ok(json!({
        "predicted_chi_hz": chi_pred / TWO_PI,
        "steady_state_g": ss_g,
        "steady_state_e": ss_e,
    }))
}

/// Steady states as the qubit drive phase turns through a full circle.
fn sweep_phase(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let params = cfg.system_params()?;
    let dc = dispersive_constants(&params)?;
    let spec = cfg.protocol_spec(&params)?;
    let omega_r = spec.omega_r();
    let n = cfg.run.phase_points;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let ap = AnalyticParams::new(
            omega_r,
            C64::from_polar(spec.omega_q_mag, phi),
            dc.chi,
            params.g,
            params.kappa(),
        )?;
        let g = steady_state(&ap, Qubit::Ground)?;
        let e = steady_state(&ap, Qubit::Excited)?;
        rows.push(vec![phi, g.re, g.im, e.re, e.im]);
    }
    out.write_text(
        "steady_state_locus.csv",
        &numeric_csv(
            &[
                "phi_q",
                "re_alpha_g",
                "im_alpha_g",
                "re_alpha_e",
                "im_alpha_e",
            ],
            rows,
        ),
    )?;
    let circle = |q| {
        steady_state_circle(
            spec.omega_q_mag,
            omega_r,
            dc.chi,
            params.g,
            params.kappa(),
            q,
        )
    };
    let (cg, rg) = circle(Qubit::Ground)?;
    let (ce, re) = circle(Qubit::Excited)?;
    let report = json!({
        "g": { "center": cg, "radius": rg },
        "e": { "center": ce, "radius": re },
        "omega_q_hz": spec.omega_q_mag / TWO_PI,
        "omega_r": omega_r / TWO_PI,
        "points": n,
    });
    out.write_json("circles.json", &report)?;
    Ok(report)
}

fn shots(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let params = cfg.system_params()?;
    let (spec, _) = resolved_spec(cfg, &params)?;
    let (g, e, _) = run_protocol(&params, &spec, &evolve_options(cfg))?;
    let noise = cfg.noise_model()?;
    let weights = matched_weights(&g, &e)?;
    let eps = cfg.noise.thermal_eps;
    let n = cfg.run.n_shots;
    let mut all = sample_shots([&g, &e], Qubit::Ground, &weights, &noise, n, eps)?;
    all.extend(sample_shots(
        [&g, &e],
        Qubit::Excited,
        &weights,
        &noise,
        n,
        eps,
    )?);
    let (ref_g, ref_e) = references(&all)?;
    let assigned = assign(&all, ref_g, ref_e)?;
    let err = assignment_error(&assigned)?;
    let (sg, se): (Vec<_>, Vec<_>) = assigned.iter().partition(|s| s.prepared == Qubit::Ground);
    out.write_text("shots_g.csv", &shots_csv(&sg))?;
    out.write_text("shots_e.csv", &shots_csv(&se))?;
    out.write_text(
        "histogram.csv",
        &histogram_csv(&histogram(&assigned, ref_g, ref_e, cfg.run.histogram_bins)?),
    )?;
    out.write_text(
        "weights.csv",
        &numeric_csv(
            &["t_s", "w_re", "w_im"],
            (0..weights.len()).map(|i| vec![weights.times[i], weights.w_re[i], weights.w_im[i]]),
        ),
    )?;

    // Integration windows stay inside the readout segment.
    let t_end = spec.duration;
    let taus: Vec<f64> = cfg
        .run
        .tau_grid_s
        .iter()
        .copied()
        .filter(|t| *t <= t_end * (1.0 + 1e-9))
        .collect();
    let settings = CampaignSettings {
        n_shots: n,
        thermal_eps: eps,
        eps_prep: cfg.noise.eps_prep,
    };
    let curve = if taus.is_empty() {
        Vec::new()
    } else {
        error_vs_time(&g, &e, &noise, &settings, &taus)?
    };
    out.write_text(
        "error_vs_time.csv",
        &numeric_csv(
            &[
                "tau_s",
                "p_e_given_g",
                "p_g_given_e",
                "eps_total",
                "eps_corrected",
            ],
            curve.iter().map(|p| {
                vec![
                    p.tau,
                    p.error.p_e_given_g,
                    p.error.p_g_given_e,
                    p.error.total,
                    p.corrected.unwrap_or(f64::NAN),
                ]
            }),
        ),
    )?;
    let summary = json!({
        "protocol": spec.kind,
        "noise": noise,
        "thermal_eps": eps,
        "ref_g": ref_g,
        "ref_e": ref_e,
        "error": err,
        "fidelity": 1.0 - err.total,
        "predicted_error_without_thermal": predicted_error(&weights, &g.alpha, &e.alpha, &noise)?,
        "weights_degenerate": { "re": weights.re_degenerate, "im": weights.im_degenerate },
    });
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn reset(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let params = cfg.system_params()?;
    let mut spec = cfg.protocol_spec(&params)?;
    if spec.kind != ProtocolKind::UnconditionalReset {
        if spec.omega_q_mag == 0.0 {
            return Err(mcread_core::Error::InvalidProtocol(
                "reset needs a qubit drive to define the virtual origin".into(),
            )
            .into());
        }
        let chi = dispersive_constants(&params)?.chi;
        spec.kind = ProtocolKind::UnconditionalReset;
        spec.reset_tail = Some(ResetTail::nominal(chi));
    }
    let opts = evolve_options(cfg);
    let (spec, tuning) = if cfg.run.tune_reset && cfg.protocol.reset.is_none() {
        let t = tune_reset(&params, &spec, &opts)?;
        let report = json!({
            "nominal_hold_s": t.nominal_hold,
            "merge_gap": t.merge_gap,
            "merge_amplitude": t.merge_amplitude,
        });
        (t.spec, Some(report))
    } else {
        (spec, None)
    };
    let (g, e, d) = run_protocol(&params, &spec, &opts)?;
    write_pair(out, &g, &e, &d)?;
    let residual = g.final_alpha().norm().max(e.final_alpha().norm());
    let report = json!({
        "protocol": spec,
        "tuning": tuning,
        "final_alpha_g": g.final_alpha(),
        "final_alpha_e": e.final_alpha(),
        "residual": residual,
    });
    out.write_json("reset.json", &report)?;
    Ok(json!({ "residual": residual, "reset_tail": spec.reset_tail }))
}

fn read_input(path: &Option<PathBuf>) -> Result<String, CliError> {
    match path {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

/// Projected values from either a shots CSV (`re_S,im_S,true_label,...`) or
/// a single numeric column.
pub fn histogram_samples(text: &str) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let parse = |s: &str| -> Result<f64, CliError> {
        s.parse::<f64>()
            .map_err(|_| CliError::Io(format!("not a number: `{s}`")))
    };
    if let (Some(re), Some(im)) = (col("re_S"), col("im_S")) {
        let label = col("true_label");
        let mut pts = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let s = C64::new(parse(&rec[re])?, parse(&rec[im])?);
            let l = label.map(|k| rec[k].to_string());
            pts.push((s, l));
        }
        let mean = |lab: &str| {
            let v: Vec<C64> = pts
                .iter()
                .filter(|(_, l)| l.as_deref() == Some(lab))
                .map(|(s, _)| *s)
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<C64>() / v.len() as f64)
        };
        return match (mean("g"), mean("e")) {
            (Some(g), Some(e)) if g != e => pts
                .iter()
                .map(|(s, _)| project_onto_axis(*s, g, e).map_err(CliError::from))
                .collect(),
            // One class only: project on the imaginary axis.
            _ => Ok(pts.iter().map(|(s, _)| s.im).collect()),
        };
    }
    if headers.len() != 1 {
        return Err(CliError::Usage(
            "expected a shots CSV (re_S, im_S, ...) or a single value column".into(),
        ));
    }
    rdr.records().map(|r| parse(&r?[0])).collect()
}

fn rb_columns(text: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let li = headers.iter().position(|h| h == "length");
    let si = headers.iter().position(|h| h == "survival");
    let (Some(li), Some(si)) = (li, si) else {
        return Err(CliError::Usage(
            "rb input needs columns `length,survival`".into(),
        ));
    };
    let (mut l, mut s) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let p = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| CliError::Io(format!("not a number: `{x}`")))
        };
        l.push(p(&rec[li])?);
        s.push(p(&rec[si])?);
    }
    Ok((l, s))
}

fn fit(
    cfg: &ExperimentConfig,
    kind: &FitKind,
    out: &mut RunDir,
) -> Result<serde_json::Value, CliError> {
    let omega_q = TWO_PI * cfg.system.qubit_frequency_hz;
    let report = match kind {
        FitKind::TwoGaussian { input } => {
            let text = read_input(input)?;
            out.set_input_hash(sha256_hex(text.as_bytes()));
            let z = histogram_samples(&text)?;
            let f = fit_two_gaussian(&z)?;
            let t_eff = if f.eps_th > 0.0 {
                Some(effective_temperature(f.eps_th, omega_q)?)
            } else {
                None
            };
            json!({
                "fit": "two_gaussian",
                "samples": z.len(),
                "eps_th": f.eps_th,
                "center_g": f.center_g,
                "center_e": f.center_e,
                "sigma": f.sigma,
                "degenerate": f.degenerate,
                "reduced_chi2": f.reduced_chi2,
                "t_eff_k": t_eff,
            })
        }
        FitKind::Rb { input } => {
            let text = read_input(input)?;
            out.set_input_hash(sha256_hex(text.as_bytes()));
            let (l, s) = rb_columns(&text)?;
            let f = fit_rb_decay(&l, &s)?;
            json!({ "fit": "rb", "a": f.a, "p": f.p, "b": f.b, "residual": f.residual })
        }
        FitKind::GateError {
            p_ref,
            p_gate,
            eps_th,
        } => {
            let eg = gate_error(*p_ref, *p_gate)?;
            let eps = eps_th.unwrap_or(cfg.system.thermal_population);
            json!({
                "fit": "gate_error",
                "gate_error": eg,
                "eps_th": eps,
                "eps_prep": prep_error(eg, eps),
            })
        }
    };
    out.write_json("fit.json", &report)?;
    Ok(report)
}

/// Loads the configuration the way the binary does.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p, overrides),
        None => ExperimentConfig::defaults_with_overrides(overrides),
    }
}
