//! Command-line front end for `bosonkit`.
//!
//! Every subcommand writes to a caller-supplied sink so that the integration
//! tests can drive [`run`] without spawning a process. Exit codes: 0 ok,
//! 1 a verification failed, 2 usage or parse error, 3 a resource cap was hit.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use bosonkit::algebra::{normal_order_wick, parse_expr, AlgebraError, Limits};
use bosonkit::coherent::CoherentError;
use bosonkit::deformed::DeformedError;
use bosonkit::sheffer::ShefferError;
use bosonkit::stirling::{normal_order_stirling, StirlingError};

pub mod commands;
pub mod family;
pub mod figures;
pub mod verify;

#[derive(Debug, Parser)]
#[command(name = "bosonkit", version, about = "Exact boson normal ordering and generalized Stirling numbers")]
pub struct Cli {
    /// Series order (λ-order for flows and EGFs).
    #[arg(long, global = true, default_value_t = 8)]
    pub order: usize,
    /// Number of terms in truncated numeric series.
    #[arg(long, global = true, default_value_t = 80)]
    pub terms: usize,
    /// Relative tolerance for numeric sums.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// Data-parallel evaluation; output is identical to the sequential run.
    #[arg(long, global = true)]
    pub parallel: bool,
    /// Normal-ordering engine.
    #[arg(long, global = true, value_enum, default_value_t = Engine::Wick)]
    pub method: Engine,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    /// Rewriting `a a† → a† a + 1`.
    Wick,
    /// String coefficients and Stirling tables.
    Stirling,
    /// Both, failing if they disagree.
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normal-order an expression such as "(ad a)^3".
    No { expr: String },
    /// Triangle CSV for a family, followed by its Bell column.
    Triangle { family: String, nmax: usize },
    /// Slots `n, numerator, denominator` of `Σ B(n,x) λ^n/n!` through `--order`.
    Egf {
        family: String,
        #[arg(long, default_value = "1")]
        x: String,
    },
    /// Sheffer catalog entries and (q, v) flows.
    Sheffer {
        #[command(subcommand)]
        action: ShefferAction,
    },
    /// Deformed Stirling polynomials for a box `general`, `canonical`, `so3` or `so21`.
    Deformed {
        r#box: String,
        nmax: usize,
        /// Evaluate at this `N` through the partial-fraction formula.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<i64>,
    },
    /// Generalized coherent-state diagnostics for `ρ(n) = B_{r,1}(n+p)`.
    Coherent {
        #[command(subcommand)]
        quantity: CoherentQuantity,
    },
    /// Write figure CSVs (`all` or one kind) into a directory.
    Figures { which: String, out_dir: PathBuf },
    /// Run the named invariant suite: oracle, sheffer, moments or all.
    Verify { suite: String },
}

#[derive(Debug, Subcommand)]
pub enum ShefferAction {
    /// Transfer pair, ladder operators and first polynomials of a named pair.
    Catalog { name: String },
    /// Flow of `q(a†)a + v(a†)`; q and v are EGF slot lists like "0,1,0".
    Flow {
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        v: String,
        /// Expansion point `z̄'`; q and v are then read in `y = x - z̄'`.
        #[arg(long, default_value = "0")]
        center: String,
        /// `z` in the sequence `A(λ) exp(z B(λ))`.
        #[arg(long, default_value = "1")]
        z: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum CoherentQuantity {
    /// Mandel parameter `Q(x)`.
    Mandel(CoherentArgs),
    /// Metric factor `ω(x)`.
    Metric(CoherentArgs),
    /// Squeezing parameters at real `z = x`.
    Squeeze(CoherentArgs),
    /// Signal-to-quantum-noise quantities at real `z = x`.
    Snr(CoherentArgs),
    /// `B_{r,1}(n)` exactly and by the truncated Dobiński sum.
    Bell {
        #[arg(long, default_value_t = 2)]
        r: u32,
        #[arg(long)]
        n: u32,
    },
    /// Quadrature moment of the weight against `B_{r,1}(n+1)`.
    Moment {
        #[arg(long, default_value_t = 2)]
        r: u32,
        #[arg(long)]
        n: u32,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct CoherentArgs {
    #[arg(long, default_value_t = 2)]
    pub r: u32,
    #[arg(long, default_value_t = 1)]
    pub p: u32,
    #[arg(long)]
    pub x: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("resource cap: {0}")]
    Resource(String),
    #[error("{0} check(s) failed")]
    VerifyFailed(usize),
    #[error("engines disagree: wick gives {wick}, stirling gives {stirling}")]
    Disagreement { wick: String, stirling: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) | CliError::Disagreement { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::WordTooLong { .. } | AlgebraError::TooManyTerms { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CoherentError> for CliError {
    fn from(e: CoherentError) -> Self {
        match e {
            CoherentError::TailBudget { .. } | CoherentError::NonConvergence(_) | CoherentError::Overflow(_) => {
                CliError::Resource(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<StirlingError> for CliError {
    fn from(e: StirlingError) -> Self {
        match e {
            StirlingError::Algebra(a) => a.into(),
            StirlingError::Numeric(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ShefferError> for CliError {
    fn from(e: ShefferError) -> Self {
        match e {
            ShefferError::TailBudget { .. } => CliError::Resource(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<DeformedError> for CliError {
    fn from(e: DeformedError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(std::io::Error::other(e))
    }
}

/// `cmd_normal_order`: the normal form under the selected engine.
pub fn normal_order(expr: &str, engine: Engine, limits: &Limits) -> Result<String, CliError> {
    let e = parse_expr(expr)?;
    let nf = match engine {
        Engine::Wick => normal_order_wick(&e, limits)?,
        Engine::Stirling => normal_order_stirling(&e, limits)?,
        Engine::Both => {
            let wick = normal_order_wick(&e, limits)?;
            let stirling = normal_order_stirling(&e, limits)?;
            if wick != stirling {
                return Err(CliError::Disagreement { wick: wick.to_string(), stirling: stirling.to_string() });
            }
            wick
        }
    };
    Ok(nf.to_string())
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let limits = Limits::default();
    match &cli.command {
        Command::No { expr } => writeln!(out, "{}", normal_order(expr, cli.method, &limits)?)?,
        Command::Triangle { family, nmax } => family::write_triangle(&family::Spec::parse(family)?, *nmax, out)?,
        Command::Egf { family, x } => family::write_egf(&family::Spec::parse(family)?, cli.order, &commands::parse_rational(x)?, out)?,
        Command::Sheffer { action } => commands::sheffer(action, cli, out)?,
        Command::Deformed { r#box, nmax, at } => commands::deformed(r#box, *nmax, *at, out)?,
        Command::Coherent { quantity } => commands::coherent(quantity, cli, out)?,
        Command::Figures { which, out_dir } => {
            for path in figures::write_figures(which, out_dir, cli.parallel)? {
                writeln!(out, "{}", path.display())?;
            }
        }
        Command::Verify { suite } => {
            let report = verify::run_suite(suite, cli.parallel)?;
            report.write(out)?;
            if report.failed() > 0 {
                return Err(CliError::VerifyFailed(report.failed()));
            }
        }
    }
    Ok(())
}
