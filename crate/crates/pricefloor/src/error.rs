use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// A model assumption required for a finite value function does not hold.
    #[error("assumption violated: {which}")]
    AssumptionViolated { which: String },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    DomainError(String),

    /// The canonical rescaling is only defined for quadratic execution costs.
    #[error("unsupported cost exponent p_hat = {0}; canonical scaling requires p_hat = 2")]
    UnsupportedExponent(f64),

    /// A grid solve produced non-finite values or escaped its a-priori bounds.
    #[error("instability detected at t = {t}: {detail}")]
    InstabilityDetected { t: f64, detail: String },

    /// The truncation schedule was exhausted before the requested tolerance.
    #[error("no convergence: last sup-norm delta {last_delta:e} above tolerance {tol:e}")]
    NoConvergence { last_delta: f64, tol: f64 },

    /// A simulation was paired with a grid solved for a different setup.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The position never moved, so per-trade statistics are undefined.
    #[error("no trades on this path; slippage decomposition undefined")]
    NoTrades,

    /// Not enough records to form the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AssumptionViolated { .. } => 2,
            Error::NoConvergence { .. } => 3,
            Error::Io(_) | Error::Config(_) => 4,
            _ => 1,
        }
    }
}
