//! Batch front end for the `ccspectra` toolkit.
//!
//! Every command reads a JSON [`config::RunConfig`], writes its artifacts to
//! an output directory and returns a process exit code: 0 on success, 2 for
//! configuration errors, 3 when a solver or root finder does not converge.

pub mod commands;
pub mod config;
pub mod expr;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expr(#[from] expr::ExprError),

    #[error(transparent)]
    Core(#[from] ccspectra::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ccspectra::Error as E;
        match self {
            CliError::Config(_) | CliError::Expr(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::NotConverged { .. } | E::WindowExhausted { .. } | E::Integrator(_) => EXIT_NOT_CONVERGED,
                E::InvalidChart(_)
                | E::GridTooSmall { .. }
                | E::InvalidBoundary(_)
                | E::NonPositiveDensity { .. }
                | E::NonFiniteCoefficient { .. }
                | E::InvalidArgument(_)
                | E::InsufficientData(_)
                | E::Unsupported(_) => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            },
            CliError::Io { .. } => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ccspectra", version, about = "Sub-Laplacian spectra and Cheeger bounds on 2D CC-charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` in the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress the summary on stdout
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest eigenpairs, heatmaps and the Courant nodal check
    Spectrum(CommonArgs),
    /// Candidate cuts, certificates and the Cheeger inequality
    Cheeger(CommonArgs),
    /// Separated Grushin spectrum by shooting
    GrushinTable {
        #[command(flatten)]
        common: CommonArgs,
        /// Also solve the 2D problem and compare
        #[arg(long)]
        cross_validate: bool,
    },
    /// Heisenberg homogeneous dimension and Cheeger constant
    Carnot(CommonArgs),
}

/// Parse arguments, run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
