//! Command-line pipeline: configuration, subcommands and error reporting.

pub mod args;
pub mod config;
pub mod error;
pub mod pipeline;

use std::ffi::OsString;

use clap::Parser;

use crate::args::Cli;
use crate::config::{load_config, validate, RunConfig};
use crate::error::CliError;
use crate::pipeline::{dispatch, Context, Outcome};

/// Resolves the configuration from the file and command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    validate(&cfg, None)?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve_config(cli)?;
    let ctx = Context::new(cfg, cli.threads);
    dispatch(&ctx, &cli.command)
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// are printed to stderr as one JSON record.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
