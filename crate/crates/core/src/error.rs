use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge feature length {got} does not match d_e = {expected}")]
    FeatureLength { expected: usize, got: usize },

    #[error("timestamp {got} precedes the last committed timestamp {last}")]
    NonMonotonic { last: f64, got: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("node id {id} out of bounds for table with {rows} rows")]
    OutOfBounds { id: usize, rows: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// True for errors caused by malformed user input (files, flags).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Config(_) | Error::FeatureLength { .. } | Error::NonMonotonic { .. }
        )
    }
}
