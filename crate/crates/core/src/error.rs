use thiserror::Error;

/// Errors raised across the library. Each variant maps to a stable CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter regime error: {0}")]
    Regime(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("root bracket error: f({lo}) = {flo:e} and f({hi}) = {fhi:e} have the same sign")]
    Bracket { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("step size underflow at t = {t} (h = {h:e}); the problem is stiff or singular here")]
    Stiff { t: f64, h: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("point outside the no-trade region: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 mathematical regime, 4 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io(_) => 2,
            Error::Regime(_) | Error::Degenerate(_) | Error::Domain(_) => 3,
            Error::Bracket { .. } => 3,
            Error::Stiff { .. } | Error::NonConvergence { .. } | Error::Resolution(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
