//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix handed to a Hermitian-only routine was not Hermitian.
    #[error("matrix is not Hermitian within tolerance (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    /// A Gram matrix could not be factorized without regularization.
    #[error("rank-deficient Gram system in {context} (pass a positive ridge to regularize)")]
    RankDeficient { context: String },

    /// Dimension mismatch or empty input.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A requested eigen/SVD accuracy could not be met.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Resource-grid index out of range.
    #[error("resource-element index out of range: {0}")]
    IndexOutOfRange(String),

    /// A repetition pattern cannot be placed in the grid.
    #[error("pattern infeasible: {0}")]
    PatternInfeasible(String),

    /// Invalid simulation configuration.
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    /// Phase ambiguity could not be resolved for a block; it is erased.
    #[error("phase unresolvable: correlation magnitude {0:.3e} below threshold")]
    PhaseUnresolvable(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            msg: msg.into(),
        }
    }
}
