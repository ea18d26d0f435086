use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcread_cli::{load_config, run_command, CliError, Command, FitKind};

/// Qubit readout simulations: trajectories, single shots and calibration fits.
#[derive(Parser, Debug)]
#[command(name = "mcread", version)]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Protocol preset, e.g. conventional, multichannel, vacuum_lock.
    #[arg(long, global = true)]
    protocol: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; each run writes into its own subdirectory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `section.key=value`, repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Paired g/e master-equation runs for the protocol.
    Simulate,
    /// Closed-form two-level trajectories and steady states.
    Analytic,
    /// Single-shot campaign with matched weights and error curve.
    Shots,
    /// Steady-state locus over the qubit drive phase.
    SweepPhase,
    /// Tuned unconditional reset and its residual.
    Reset,
    /// Calibration fits.
    Fit {
        #[command(subcommand)]
        kind: FitSub,
    },
}

#[derive(Subcommand, Debug)]
enum FitSub {
    /// Thermal two-Gaussian histogram model; reads stdin without --input.
    TwoGaussian {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Randomized-benchmarking decay from `length,survival` CSV.
    Rb {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    GateError {
        #[arg(long)]
        p_ref: f64,
        #[arg(long)]
        p_gate: f64,
        #[arg(long)]
        eps_th: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let mut overrides = Vec::new();
    if let Some(p) = &cli.protocol {
        overrides.push(format!("protocol.preset=\"{p}\""));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("run.output_dir={:?}", o.display().to_string()));
    }
    overrides.extend(cli.overrides.iter().cloned());
    let cfg = load_config(cli.config.as_deref(), &overrides)?;
    let cmd = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::Analytic => Command::Analytic,
        Sub::Shots => Command::Shots,
        Sub::SweepPhase => Command::SweepPhase,
        Sub::Reset => Command::Reset,
        Sub::Fit { kind } => Command::Fit(match kind {
            FitSub::TwoGaussian { input } => FitKind::TwoGaussian { input },
            FitSub::Rb { input } => FitKind::Rb { input },
            FitSub::GateError {
                p_ref,
                p_gate,
                eps_th,
            } => FitKind::GateError {
                p_ref,
                p_gate,
                eps_th,
            },
        }),
    };
    let out = run_command(&cmd, &cfg)?;
    Ok(serde_json::json!({
        "output_dir": out.dir.display().to_string(),
        "manifest": out.manifest,
        "summary": out.summary,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).unwrap_or_default();
            // A closed pipe on stdout is not a failure of the run.
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
