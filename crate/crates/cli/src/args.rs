use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "surrokit", version, about = "Burgers subgrid closures and two-body event generation")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Root seed (overrides `sim.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores. Artifacts do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fine-grid runs, coarse labels and the packed dataset.
    GenData,
    /// Train the closure network and calibrate the Smagorinsky baseline.
    TrainClosure,
    /// Train the event VAE on fresh Monte Carlo events.
    TrainVae,
    #[command(subcommand)]
    Validate(ValidateCommand),
    #[command(subcommand)]
    Events(EventsCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
    #[command(subcommand)]
    Run(RunCommand),
}

#[derive(Debug, Clone, Subcommand)]
pub enum ValidateCommand {
    Apriori,
    Aposteriori,
}

#[derive(Debug, Clone, Subcommand)]
pub enum EventsCommand {
    /// Reference Monte Carlo sample.
    Sample,
    /// Latent-buffer and prior-sampled events from the trained VAE.
    Generate,
    /// Physics report comparing generated events to the reference sample.
    Validate,
}

#[derive(Debug, Clone, Subcommand)]
pub enum BenchCommand {
    Infer,
}

#[derive(Debug, Clone, Subcommand)]
pub enum RunCommand {
    Dns,
    Les {
        #[arg(long, value_enum, default_value_t = ClosureArg::Nn)]
        closure: ClosureArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClosureArg {
    None,
    Smag,
    Nn,
}

impl ClosureArg {
    pub fn name(self) -> &'static str {
        match self {
            ClosureArg::None => "none",
            ClosureArg::Smag => "smagorinsky",
            ClosureArg::Nn => "neural",
        }
    }
}
