use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` has lower bound above upper bound")]
    InvertedBounds(String),
    #[error("binary column `{0}` must have bounds inside [0, 1]")]
    BinaryBounds(String),
    #[error("row `{row}` references unknown column index {column}")]
    UnknownColumn { row: String, column: usize },
    #[error("row `{row}` lists column `{column}` more than once")]
    RepeatedCoefficient { row: String, column: String },
    #[error("model has no columns")]
    Empty,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("enumeration limit of {limit} nodes exceeded")]
    EnumerationLimit { limit: u64 },
    #[error("column `{0}` is continuous or unbounded; enumeration needs finite integer domains")]
    NotEnumerable(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

impl LpParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        LpParseError { line, message: message.into() }
    }
}
