use crate::model::ValidationReport;
use crate::rational::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model is not well-formed:\n{0}")]
    InvalidModel(ValidationReport),

    #[error("outcome table {table} has no entry for ({row}, {col})")]
    DomainMismatch { table: String, row: String, col: String },

    #[error("outcome table {table} holds fractional outcome {value} at ({row}, {col}); a behavior needs point outcomes in {{-1, 0, +1}}")]
    FractionalOutcome {
        table: String,
        row: String,
        col: String,
        value: Box<Rational>,
    },

    #[error("behavior has zero outcomes; reduce it with zero_to_coin or post-selection first")]
    TernaryBehavior,

    #[error("behavior is signalling (max marginal deviation {max_deviation}); no joint distribution can reproduce it")]
    Signalling { max_deviation: Rational },

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: String, value: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
