use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// configuration problems, data problems and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unexpected column `{0}`")]
    UnexpectedColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: unknown label value `{value}`")]
    UnknownLabel { row: usize, value: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument `{field}`: {message}")]
    InvalidArgument { field: &'static str, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            message: message.into(),
        }
    }

    /// True for errors caused by bad numbers rather than bad input files or flags.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Degenerate(_))
    }

    /// Process exit status for the command-line tool: 2 for configuration
    /// errors, 3 for data errors, 4 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        if self.is_numeric() {
            4
        } else if self.is_data() || matches!(self, Error::DimensionMismatch { .. }) {
            3
        } else {
            2
        }
    }

    /// True for errors caused by the contents of an input file.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::MissingColumn(_)
                | Error::UnexpectedColumn(_)
                | Error::BadCell { .. }
                | Error::UnknownLabel { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
