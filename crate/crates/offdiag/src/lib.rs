//! Extreme-value functionals of high-dimensional sample covariance and
//! correlation matrices.
//!
//! For an i.i.d. data matrix `X` with `p` rows (coordinates) and `n` columns
//! (observations), the sample covariance `S = X Xᵀ` has off-diagonal entries
//! whose largest values, after centering by the normalizing constants in
//! [`norming`], converge to a Poisson point process with Gumbel-type intensity.
//! This crate computes those functionals, runs the independence tests and
//! threshold estimators built on them, and checks the limit theorems
//! empirically with a seeded, schedule-independent Monte Carlo engine.
//!
//! # Modules
//!
//! - [`norming`] — normal tail Φ̄, normalizing constants d for arbitrary
//!   counts (pairs, m-tuples), the Gumbel law Λ, the limit-law quantile of the
//!   maximum-entry test, and the exponential mean measure.
//! - [`kernels`] — data/Gram/correlation matrices, tensor entries, normalized
//!   point clouds (off-diagonal, squared, diagonal, heavy-tail diagonal),
//!   bounded top-k/bottom-k selection, and a power-iteration operator norm.
//! - [`extremes`] — maximum-entry (Jiang-type) and spacing statistics, their
//!   tests, the limit-law sampler −log Γ, Monte Carlo quantile tables, and the
//!   calibrated rectangular region test.
//! - [`thresholding`] — entry thresholding of covariance/correlation matrices
//!   at t_n = C·√(log p / n) and the scaled operator-norm consistency metric.
//! - [`sim`] — distribution families with analytic standardization, splittable
//!   per-replicate RNG streams, the Kolmogorov–Smirnov statistic, and the
//!   parallel experiment runners.
//! - [`io`] — the plain-text matrix and config formats, atomic CSV tables,
//!   and digest-carrying run manifests.
//!
//! # Runnable examples
//!
//! Each major capability has a standalone example:
//!
//! ```text
//! cargo run --release -p offdiag --example norming_constants
//! cargo run --release -p offdiag --example matrix_kernels
//! cargo run --release -p offdiag --example independence_tests
//! cargo run --release -p offdiag --example spacing_quantiles
//! cargo run --release -p offdiag --example point_process_counts
//! cargo run --release -p offdiag --example gumbel_maximum
//! cargo run --release -p offdiag --example random_walk_extremes
//! cargo run --release -p offdiag --example heavy_tail_diagonal
//! cargo run --release -p offdiag --example thresholding_consistency
//! ```
//!
//! The `offdiag` binary wraps the same library surface as four subcommands
//! (`compute`, `test`, `simulate`, `report`); see the README for the file
//! formats and exit codes.
//!
//! # Determinism
//!
//! Every Monte Carlo entry point takes an explicit seed and derives one
//! counter-based RNG stream per replicate, so results are byte-identical for
//! any worker count. Nothing is ever seeded from the clock.

pub mod extremes;
pub mod io;
pub mod kernels;
pub mod norming;
pub mod sim;
pub mod thresholding;

/// Crate version string recorded in run manifests and summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Unified error type for the whole crate.
///
/// The variants map one-to-one onto the CLI exit codes (see the binary):
/// parse errors carry a line number where one exists, domain errors describe
/// the violated precondition, resource errors are refusals issued *before*
/// allocation, and non-convergence carries the last iterate so callers can
/// decide whether it is usable.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed textual input (matrix file, config file, CLI value).
    #[error("parse error: {msg}{}", fmt_line(.line))]
    Parse {
        /// 1-based line number in the offending file, when known.
        line: Option<usize>,
        /// Description of what failed to parse.
        msg: String,
    },

    /// A mathematical precondition was violated (bad count, α outside (0,1),
    /// non-finite input, degenerate diagonal, …).
    #[error("domain error: {0}")]
    Domain(String),

    /// A run was refused before allocation because it would exceed a
    /// configured resource budget.
    #[error("resource refusal: {0}")]
    Resource(String),

    /// An iterative routine hit its iteration cap without meeting its
    /// tolerance. `last_estimate` is the final iterate.
    #[error("no convergence after {iterations} iterations (last estimate {last_estimate:e})")]
    NoConvergence {
        iterations: usize,
        last_estimate: f64,
    },

    /// Filesystem failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl Error {
    /// Shorthand for a domain error.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Shorthand for a parse error with a known line number.
    pub fn parse_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// Shorthand for a parse error with no line context.
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            msg: msg.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

// ---------------------------------------------------------------------------
// Shared small enums
// ---------------------------------------------------------------------------

/// Which matrix a statistic is computed from: raw sample covariance entries
/// (`Covariance`) or sample correlation entries (`Correlation`).
///
/// The centering sequences are the same for both; the mode selects the input
/// and is carried through reports so a reader can tell the rows apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryMode {
    Covariance,
    Correlation,
}

impl EntryMode {
    /// Stable token used in CLI flags and CSV columns.
    pub fn token(self) -> &'static str {
        match self {
            EntryMode::Covariance => "cov",
            EntryMode::Correlation => "corr",
        }
    }
}

impl std::str::FromStr for EntryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cov" => Ok(EntryMode::Covariance),
            "corr" => Ok(EntryMode::Correlation),
            other => Err(Error::parse(format!(
                "unknown mode `{other}` (expected `cov` or `corr`)"
            ))),
        }
    }
}
