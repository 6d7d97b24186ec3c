//! Command-line front end for `rscp-core`.
//!
//! Subcommands map one-to-one onto library operations and write
//! deterministic text files: VTK for grids, OBJ for meshes, CSV for
//! potentials and contours, JSON for states, reports and sweep manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod format;
pub mod sweep;
pub mod writers;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rscp_core::density::DensityError;
use rscp_core::verify::VerifyError;
use rscp_core::{SpecfunError, StateError, SurfaceError};
use serde_json::json;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::State(_) => EXIT_VALIDATION,
            CliError::Verification(_) | CliError::Numerical(_) => EXIT_VERIFICATION,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::State(e) => e.kind(),
            CliError::Verification(_) => "verification",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

impl From<DensityError> for CliError {
    fn from(e: DensityError) -> Self {
        match e {
            DensityError::State(s) => CliError::State(s),
            DensityError::Quadrature(q) => CliError::Numerical(q.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SpecfunError> for CliError {
    fn from(e: SpecfunError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::State(s) => CliError::State(s),
            VerifyError::Density(d) => d.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rscp",
    version,
    about = "Bound states of the double ring-shaped Coulomb potential"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the quasi quantum numbers and energy as JSON.
    State(StateArgs),
    /// Sample V(r, θ) along r or θ as CSV.
    Potential(PotentialArgs),
    /// Write the density grid as legacy VTK.
    Grid(GridCmd),
    /// Write an isosurface as OBJ.
    Isosurface(IsosurfaceCmd),
    /// Write yoz-plane contours as CSV or JSON.
    Slice(SliceCmd),
    /// Run the numerical checks and print a JSON report.
    Verify(VerifyCmd),
    /// Run a batch of states from a job file or preset.
    Sweep(SweepCmd),
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub l: u32,
    #[arg(long, allow_hyphen_values = true)]
    pub m: i32,
    #[arg(long = "Z", default_value_t = 1.0)]
    pub z: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub c: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Lattice points per axis (odd).
    #[arg(long = "N", default_value_t = 151)]
    pub n_points: usize,
    /// Half-width of the cube; chosen from --coverage when absent.
    #[arg(long)]
    pub extent: Option<f64>,
    /// Radial probability the automatic extent must enclose.
    #[arg(long, default_value_t = 0.999)]
    pub coverage: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PotentialArgs {
    #[arg(long = "Z", default_value_t = 1.0)]
    pub z: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub c: f64,
    /// Radius or range a:b:step.
    #[arg(long)]
    pub r: String,
    /// Polar angle or range a:b:step.
    #[arg(long)]
    pub theta: String,
    /// Read and write θ in degrees.
    #[arg(long)]
    pub degrees: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridScale {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Args)]
pub struct GridCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = GridScale::Absolute)]
    pub scale: GridScale,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IsosurfaceCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Relative probability value in (0, 100).
    #[arg(long, default_value_t = 50.0)]
    pub level: f64,
    /// Remove the octant x<0, y<0, z>0 and cap the cut.
    #[arg(long)]
    pub cutaway: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SliceFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SliceCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Levels as a list and/or a:b:step ranges.
    #[arg(long, default_value = "10:100:10")]
    pub levels: String,
    #[arg(long, value_enum, default_value_t = SliceFormat::Csv)]
    pub format: SliceFormat,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Skip the grid-mass check.
    #[arg(long)]
    pub no_grid: bool,
    /// Sample points per ODE residual check.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = rscp_core::verify::DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
}

#[derive(Debug, Clone, Args)]
pub struct SweepCmd {
    /// JSON job file.
    #[arg(long, conflicts_with = "preset")]
    pub job: Option<PathBuf>,
    /// Built-in parameter matrix.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Override the grid resolution of every run.
    #[arg(long = "N")]
    pub n_points: Option<usize>,
    /// Output directory (overrides the job file).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
/// Errors are reported as JSON on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let err = CliError::Validation(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be ≥ 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::State(a) => commands::state(a),
        Command::Potential(a) => commands::potential(a),
        Command::Grid(a) => commands::grid(a),
        Command::Isosurface(a) => commands::isosurface(a),
        Command::Slice(a) => commands::slice(a),
        Command::Verify(a) => commands::verify(a),
        Command::Sweep(a) => sweep::run(a),
    })
}
