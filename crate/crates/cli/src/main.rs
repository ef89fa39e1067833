//! `linsect`: volumes, integrals and samples of real algebraic manifolds
//! from random linear slices.
//!
//! Exit codes: 0 success, 2 usage error, 3 manifold or expression parse
//! error, 4 solver failure or unreliable result, 5 rejection sampling below
//! the acceptance floor, 6 I/O error, 7 any other estimation error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linsect::estimators::EstimateError;
use linsect::expressions::ExprError;
use linsect::manifold_file::ManifoldFileError;
use linsect::slicing::IntersectMethod;
use thiserror::Error;

use output::Format;

#[derive(Parser)]
#[command(name = "linsect", version, about = "Integration and sampling on real algebraic manifolds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    /// Univariate root finding for one free parameter, homotopy otherwise.
    Auto,
    /// Homotopy continuation on the equations restricted to the slice.
    Homotopy,
    /// Homotopy continuation on the equations together with the slice.
    FullSystem,
}

impl From<Method> for IntersectMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => IntersectMethod::Auto,
            Method::Homotopy => IntersectMethod::Homotopy,
            Method::FullSystem => IntersectMethod::FullSystem,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Seed of the random streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// How intersections are computed.
    #[arg(long, global = true, value_enum, default_value_t = Method::Auto)]
    method: Method,
    /// Draw affine slices as `u + span(v)` instead of `A x = b`.
    #[arg(long, global = true)]
    explicit_slices: bool,
    /// Fraction of failed slices above which a result is flagged unreliable.
    #[arg(long, global = true, default_value_t = 0.01)]
    breakdown_threshold: f64,
}

#[derive(Args, Clone, Debug)]
pub struct ManifoldArgs {
    /// Manifold description file.
    manifold: PathBuf,
    /// Treat the manifold as projective.
    #[arg(long)]
    projective: bool,
    /// Restrict to a box, e.g. "x in [-1.5, 1.5]; y in [0, 1]".
    #[arg(long = "box")]
    region: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the volume of a manifold.
    Volume {
        #[command(flatten)]
        manifold: ManifoldArgs,
        #[command(flatten)]
        estimate: EstimateArgs,
    },
    /// Estimate the integral of a function over a manifold.
    Integrate {
        #[command(flatten)]
        manifold: ManifoldArgs,
        /// Integrand; may use definitions from the manifold file.
        #[arg(long = "f")]
        integrand: String,
        #[command(flatten)]
        estimate: EstimateArgs,
    },
    /// Draw i.i.d. points with density proportional to a function.
    Sample {
        #[command(flatten)]
        manifold: ManifoldArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Also output the points under a seeded Gaussian projection to this
        /// many dimensions. The projected points are not uniform on the image.
        #[arg(long)]
        project: Option<usize>,
    },
    /// Draw i.i.d. points on a projective manifold.
    SampleProjective {
        #[command(flatten)]
        manifold: ManifoldArgs,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Tabulate ρ(θ0) ≈ μ1/μ2 for an observable θ and a Boltzmann weight.
    Physics {
        #[command(flatten)]
        manifold: ManifoldArgs,
        /// Slices per integral.
        #[arg(long, default_value_t = 10_000)]
        k: u64,
        #[arg(long, default_value_t = 60.0)]
        theta_min: f64,
        #[arg(long, default_value_t = 180.0)]
        theta_max: f64,
        #[arg(long, default_value_t = 3.0)]
        theta_step: f64,
        /// Half-width Δθ of the window around each θ0.
        #[arg(long, default_value_t = 3.0)]
        delta: f64,
        /// Observable θ.
        #[arg(long, default_value = "theta")]
        observable: String,
        /// Weight f in μ1.
        #[arg(long, default_value = "boltzmann")]
        weight: String,
        /// Compute every integral from one shared set of slices instead of
        /// an independent set per integral.
        #[arg(long)]
        shared_slices: bool,
    },
    /// Running estimates of a plane curve's length from Gaussian slices and
    /// from lines meeting a disc.
    CompareBaseline {
        #[command(flatten)]
        manifold: ManifoldArgs,
        /// Radius of the disc containing the curve.
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 100_000)]
        k: u64,
        /// Known length, copied into the output.
        #[arg(long)]
        reference: Option<f64>,
    },
    /// Number of slices needed for accuracy ε from the deterministic
    /// variance bound.
    Plan {
        /// Degree bound d.
        #[arg(long)]
        degree: usize,
        /// Manifold dimension n.
        #[arg(long)]
        dim: usize,
        /// Bound C on |x|^2 over the manifold.
        #[arg(long = "C")]
        c_bound: f64,
        /// Bound K on f over the manifold.
        #[arg(long = "K", default_value_t = 1.0)]
        k_bound: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.9)]
        confidence: f64,
    },
}

#[derive(Args, Clone, Debug)]
pub struct EstimateArgs {
    /// Number of slices.
    #[arg(long, default_value_t = 10_000)]
    k: u64,
    /// Accuracy for the Chebyshev bound.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Bound K on the integrand, for the deterministic variance bound.
    #[arg(long = "K")]
    k_bound: Option<f64>,
    /// Bound C on |x|^2, for the deterministic variance bound.
    #[arg(long = "C")]
    c_bound: Option<f64>,
}

#[derive(Args, Clone, Debug)]
pub struct SampleArgs {
    /// Unnormalized density; may use definitions from the manifold file.
    #[arg(long, default_value = "1")]
    density: String,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Bound K on the density.
    #[arg(long = "K")]
    k_bound: Option<f64>,
    /// Bound C on |x|^2, measured after any shift in the manifold file.
    #[arg(long = "C")]
    c_bound: Option<f64>,
    /// Rejection constant, overriding K and C.
    #[arg(long)]
    kappa: Option<f64>,
    /// Estimate K and C from this many exploration slices.
    #[arg(long)]
    explore: Option<u64>,
    /// Factor applied to explored bounds.
    #[arg(long, default_value_t = 1.2)]
    safety: f64,
    /// Abort when the expected acceptance rate falls below this.
    #[arg(long, default_value_t = 1e-6)]
    acceptance_floor: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    File(#[from] ManifoldFileError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::File(ManifoldFileError::Io { .. }) | Self::Io(_) => 6,
            Self::File(_) => 3,
            Self::Expr(ExprError::Domain { .. }) => 7,
            Self::Expr(_) => 3,
            Self::Estimate(e) => match e {
                EstimateError::InvalidArgument(_) => 2,
                EstimateError::Slice(_) => 4,
                EstimateError::AcceptanceFloor { .. } => 5,
                EstimateError::Expr(ExprError::Domain { .. }) => 7,
                EstimateError::Expr(_) => 3,
                _ => 7,
            },
        }
    }
}

/// Outcome of a command that produced output.
pub enum Status {
    Ok,
    Unreliable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.common, cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Unreliable) => {
            eprintln!("warning: solver breakdown rate above threshold; result is unreliable");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
