mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Partial(String),
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Partial(_) => 4,
            CliError::Failed(_) | CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oscilla", version, about = "Homogenization of the Neumann problem on thin oscillating spherical strips")]
struct Cli {
    /// Worker threads (defaults to the number of cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the resolved config and problem sizes without solving.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON config (`-` for stdin); omitted keys take their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a boundary profile and report its extrema.
    ValidateProfile {
        /// JSON `{a0, modes: [{k, c, s}], a}`; defaults to the reference profile.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Solve X⁰ and Θ on the cell and report q₀.
    CellSolve {
        #[command(flatten)]
        config: ConfigArg,
        /// Write the JSON here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve the homogenized equation for w₀.
    Homogenize {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve the thin-strip problem for one ε.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        /// Write the solution (mesh text format) here; otherwise it precedes the summary on stdout.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Write the assembled stiffness matrix in Matrix Market format.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Run an ε-sweep and write CSV, JSON and gnuplot outputs.
    Converge {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Stem for the gnuplot `.dat`/`.plt` pair.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the self-verification checks.
    Verify {
        /// Sweep config for the sweep-based checks; defaults to the standard sweep.
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated check ids to run.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Test hook: shift the energy form of q₀ before the identity comparison.
        #[arg(long, hide = true, default_value_t = 0.0)]
        q0_identity_offset: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let dry = cli.dry_run;
    match cli.command {
        Command::ValidateProfile { config } => commands::validate_profile(config.as_deref(), dry),
        Command::CellSolve { config, output } => commands::cell_solve(config.config.as_deref(), output.as_deref(), dry),
        Command::Homogenize { config, output } => commands::homogenize(config.config.as_deref(), output.as_deref(), dry),
        Command::Solve { config, field, dump_matrix } => commands::solve(config.config.as_deref(), field.as_deref(), dump_matrix.as_deref(), dry),
        Command::Converge { config, csv, json, plot } => commands::converge(config.config.as_deref(), commands::OutputOverrides { csv, json, plot }, dry),
        Command::Verify { config, only, q0_identity_offset } => commands::verify(config.config.as_deref(), only, q0_identity_offset, cli.jobs, dry),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
