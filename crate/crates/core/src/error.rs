use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// The variants map onto the process exit statuses used by the command line
/// front end (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    ConfigList(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation warning: {0}")]
    Truncation(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("no spectral gap: largest eigenvalue on the complement of the tangent direction is {lambda:.6e}")]
    NoGap { lambda: f64 },

    #[error("relaxation rate m = {m} does not exceed the projection constant C* = {c_star}; choose a larger m")]
    RelaxationTooSmall { m: f64, c_star: f64 },

    #[error("operator regularity check failed: {0}")]
    LemmaViolation(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("divergence at step {step}: L2 norm {norm:.3e} exceeds {limit:.1e}")]
    Divergence { step: usize, norm: f64, limit: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("interface error: {0}")]
    Interface(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 2 configuration, 3 assumption violation,
    /// 4 numerical divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigList(_) => 2,
            Error::Assumption(_)
            | Error::NoGap { .. }
            | Error::RelaxationTooSmall { .. }
            | Error::LemmaViolation(_) => 3,
            Error::Divergence { .. } | Error::NoConvergence { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
