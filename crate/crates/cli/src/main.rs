//! `evogame`: simulate, fit and check entropic evolutionary game models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes.
pub mod code {
    pub const VALIDATION: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INTEGRATOR: u8 = 3;
    pub const OPTIMIZER: u8 = 4;
    pub const HULL: u8 = 5;
}

/// An error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(code::CONFIG, message)
    }
}

impl From<evogame::Error> for Failure {
    fn from(e: evogame::Error) -> Self {
        use evogame::Error as E;
        let code = match e {
            E::Integrator { .. } => code::INTEGRATOR,
            E::Infeasible(_) => code::HULL,
            _ => code::CONFIG,
        };
        Failure::new(code, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "evogame", version, about = "Entropic evolutionary game models: simulation and payoff inference")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config document; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = all cores. Falls back to EVOGAME_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a trajectory dataset.
    Simulate(commands::SimulateFlags),
    /// Fit payoff coefficients to a dataset.
    Infer(commands::InferFlags),
    /// Attach mixed strategies reconstructed from observed velocities.
    Reconstruct(commands::ReconstructFlags),
    /// Simulate under a payoff file from given or sampled initial conditions.
    Rollout(commands::RolloutFlags),
    /// Run a validation suite and write its pass/fail table.
    Validate(commands::ValidateFlags),
}

fn thread_count(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("EVOGAME_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::config(format!("EVOGAME_THREADS must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = thread_count(cli.common.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::config(format!("cannot start thread pool: {e}")))?;
    match cli.command {
        Command::Simulate(f) => commands::simulate(&cli.common, f),
        Command::Infer(f) => commands::infer(&cli.common, f),
        Command::Reconstruct(f) => commands::reconstruct(&cli.common, f),
        Command::Rollout(f) => commands::rollout(&cli.common, f),
        Command::Validate(f) => commands::validate(&cli.common, f),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
