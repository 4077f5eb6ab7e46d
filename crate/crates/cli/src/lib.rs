//! Experiment front end: training, evaluation, convergence studies,
//! ablations, theory reports and oracle data generation.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or input paths.
    #[error("{0}")]
    Usage(String),
    /// Failure while running: divergence, malformed data, I/O on outputs.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{what}: {m}")),
        }
    }
}

impl From<tcad_core::Error> for CliError {
    fn from(e: tcad_core::Error) -> Self {
        use tcad_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::Schema(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tcad", version, about = "Anomaly detection by classification against synthetic anomalies")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated seeds; overrides `seeds` from the config.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Worker threads for independent runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per seed, calibrate the threshold and evaluate.
    Train,
    /// Evaluate a saved checkpoint on the configured test data.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train over the configured n-grid and aggregate per grid point.
    Convergence,
    /// Vary one setting over several values.
    Ablate {
        #[arg(long, value_enum)]
        axis: commands::Axis,
        /// Comma-separated values; the first one is the baseline.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Print the network sizing and rates for a sample size and smoothness.
    Theory {
        /// Number of normal samples
        #[arg(long)]
        n: u64,
        /// Input dimension
        #[arg(long)]
        d: u32,
        /// Hölder smoothness of the density
        #[arg(long)]
        alpha: f64,
        /// Tsybakov noise exponent
        #[arg(long)]
        q: f64,
        /// Radius of the Hölder ball
        #[arg(long)]
        r: f64,
        /// Weight of the normal class, in (0, 1)
        #[arg(long)]
        s: f64,
    },
    /// Write labeled samples from an oracle problem to `samples.csv` plus
    /// `samples.schema.json` in the output directory.
    Synth {
        #[arg(long, conflicts_with = "density")]
        problem: Option<String>,
        #[arg(long)]
        density: Option<PathBuf>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
