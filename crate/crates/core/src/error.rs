use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One offending record in a CSV input.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based data row (header excluded), or 0 when the problem is file-wide.
    pub row: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.row == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "row {}: {}", self.row, self.message)
        }
    }
}

fn join_rows(rows: &[RowError]) -> String {
    rows.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed ({} problem(s)): {}", .0.len(), join_rows(.0))]
    Validation(Vec<RowError>),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("trial {trial_id} skipped: {reason}")]
    TrialSkipped { trial_id: String, reason: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(row: usize, message: impl Into<String>) -> Self {
        Error::Validation(vec![RowError {
            row,
            message: message.into(),
        }])
    }
}
