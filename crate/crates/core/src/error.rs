//! Error type shared by all numeric modules.

use thiserror::Error;

/// Errors produced by the estimation and approximation pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller-supplied value violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is inconsistent (bad sieve bounds, log argument < 1, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A computation underflowed or degenerated; carries enough context to locate it.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: requested tol {tol:e}, achieved {achieved:e}, estimate {estimate}")]
    Quadrature {
        tol: f64,
        achieved: f64,
        estimate: f64,
    },

    /// All EM starts failed.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Model selection had no successful row.
    #[error("selection failed: {0}")]
    Selection(String),

    /// Slope-heuristic calibration was degenerate.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Rejection sampling could not meet its acceptance-rate contract.
    #[error("sampling failed: {0}")]
    Sampling(String),

    /// Mixing-measure discretization could not meet its sup-norm contract.
    #[error("discretization failed: sup-norm bound {bound:e} unreachable, achieved {achieved:e}")]
    Discretization { bound: f64, achieved: f64 },

    /// Monte Carlo risk estimation saw too many replication failures.
    #[error("risk estimation failed: {0}")]
    Risk(String),

    /// A density construction (bump, base density, mixture) could not be completed.
    #[error("construction failed: {0}")]
    Construction(String),

    /// File input/output error.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization error.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
