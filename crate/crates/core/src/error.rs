use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate denominator {0}")]
    Degenerate(f64),

    #[error("ill-conditioned finite difference: second derivative estimate {0:e} is indistinguishable from zero")]
    IllConditioned(f64),

    #[error("membership still holds at the upper power bracket {p_hi}; increase p_hi")]
    BracketTooSmall { p_hi: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
