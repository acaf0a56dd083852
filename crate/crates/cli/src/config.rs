//! Command-line schema, argument parsing helpers, and the exit-code
//! taxonomy: 0 success, 1 configuration, 2 stabilizability/detectability,
//! 3 Riccati synthesis, 4 primal-dual stability, 5 numerical divergence.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use steadyctl_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "steadyctl",
    version,
    about = "Optimal steady-state and transient control of disturbed LTI systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct InputArgs {
    /// Plant definition file (JSON with keys A, B, C, d, Q, R).
    #[arg(long, value_name = "PATH", conflicts_with = "network")]
    pub system: Option<PathBuf>,
    /// Power-network definition file (JSON with buses, lines, reference).
    #[arg(long, value_name = "PATH")]
    pub network: Option<PathBuf>,
    /// Disturbance vector override, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
    pub d: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
pub struct GainArgs {
    /// Diagonal of the primal step matrix K^y, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
    pub ky: Option<Vec<f64>>,
    /// Diagonal of the dual step matrix K^lambda, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
    pub klambda: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
pub struct SimArgs {
    /// Simulation horizon in seconds.
    #[arg(long, value_name = "SECONDS", default_value_t = 40.0)]
    pub t_end: f64,
    /// Fixed integrator step in seconds.
    #[arg(long, value_name = "SECONDS", default_value_t = 1e-3)]
    pub dt: f64,
    /// Time at which the disturbance switches on.
    #[arg(long, value_name = "SECONDS", default_value_t = 1.0)]
    pub t_disturb: f64,
    /// Record every N-th integration step.
    #[arg(long, value_name = "N", default_value_t = 100)]
    pub stride: usize,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve the steady-state program and print (x̄, ū, λ̄) with residuals.
    Steady {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Synthesize the Riccati feedback and report stability margins.
    Synthesize {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        gains: GainArgs,
        /// Scale factor applied to both step matrices.
        #[arg(long, value_name = "K", default_value_t = 1.0, value_parser = parse_positive)]
        k: f64,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Integrate one closed loop and export the trajectory.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        gains: GainArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Which closed loop to integrate.
        #[arg(long, value_enum, default_value_t = FormArg::Mu)]
        form: FormArg,
        /// Gain scale factor.
        #[arg(long, value_name = "K", default_value_t = 1.0, value_parser = parse_positive)]
        k: f64,
        /// Initial plant state (default: origin).
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        x0: Option<Vec<f64>>,
        /// Initial primal controller state y₀ (default: origin).
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        y0: Option<Vec<f64>>,
        /// Initial multiplier state λ₀ (default: origin); the μ-form start
        /// is derived as μ₀ = λ₀ - K^λ·x₀.
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        lambda0: Option<Vec<f64>>,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Analytic cost decomposition and analytic-vs-simulated gap report.
    Perf {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        gains: GainArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Gain scale factors to sweep, comma separated.
        #[arg(long, value_name = "LIST", default_value = "1", value_delimiter = ',', value_parser = parse_positive)]
        k: Vec<f64>,
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        x0: Option<Vec<f64>>,
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        y0: Option<Vec<f64>>,
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        lambda0: Option<Vec<f64>>,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Full benchmark bundle: trajectories, cost curves, gain sweep.
    Casestudy {
        /// Network file; defaults to the built-in four-bus benchmark.
        #[arg(long, value_name = "PATH")]
        network: Option<PathBuf>,
        /// Disturbance vector; defaults to the benchmark step load.
        #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
        d: Option<Vec<f64>>,
        #[command(flatten)]
        gains: GainArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Gain scale factors to sweep, comma separated.
        #[arg(long, value_name = "LIST", default_value = "0.5,1,2,5,10,20", value_delimiter = ',', value_parser = parse_positive)]
        k: Vec<f64>,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormArg {
    Optimal,
    Lambda,
    Mu,
}

fn parse_finite(text: &str) -> Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("not a number: {text:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite entry: {text:?}"))
    }
}

fn parse_positive(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("not a number: {text:?}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be positive".to_string())
    }
}

/// A failure plus the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(err) => match err {
                // steady-state program ill posed
                CoreError::NotStabilizable { .. }
                | CoreError::NotDetectable { .. }
                | CoreError::SingularKkt => 2,
                // Riccati synthesis failure
                CoreError::NoStabilizingSolution { .. }
                | CoreError::ResidualTooLarge { .. }
                | CoreError::ConvergenceFailure { .. }
                | CoreError::SingularMatrix { .. } => 3,
                // primal-dual dynamics unstable
                CoreError::NotHurwitzS { .. } => 4,
                // trajectory blew up
                CoreError::NonFiniteState { .. } => 5,
                // bad inputs of any other kind
                CoreError::NotHurwitz { .. }
                | CoreError::GridMismatch
                | CoreError::InvalidInput(_)
                | CoreError::Io(_) => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        CliError::Core(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Config(format!("io: {err}"))
    }
}
