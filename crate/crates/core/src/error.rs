use thiserror::Error;

use crate::process::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process spec: {0}")]
    InvalidSpec(ValidationReport),

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("quantizer overflow: {x} at b={b} does not fit the integer code range")]
    QuantizerOverflow { x: f64, b: u32 },

    #[error("block length {k} exceeds path length {n}")]
    BlockTooLong { k: usize, n: usize },

    #[error("no block counts to estimate from")]
    EmptyCounts,

    #[error("intractable discretization: {0}")]
    Intractable(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no log-slope regime: {0}")]
    NoLogSlopeRegime(String),

    #[error("path has no jump indicators for a piecewise-constant Markov spec")]
    MissingJumpIndicators,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line runner: 1 for anything the
    /// caller got wrong, 2 for numerical trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Intractable(_)
            | Error::DegenerateFit(_)
            | Error::NoLogSlopeRegime(_)
            | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}
