//! Configuration, subcommands and artifact output for the `mcread` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{load_config, run_command, Command, FitKind, RunOutput};
pub use config::ExperimentConfig;
pub use error::CliError;
