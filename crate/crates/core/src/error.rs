use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Data,
    /// A numerical routine could not produce a result.
    Numerical,
    /// A referenced entity does not exist.
    NotFound,
    /// The operation needs state or preconditions that are not met.
    Precondition,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("invalid variable name at column {0}")]
    InvalidVariableName(usize),
    #[error("no usable rows after dropping {dropped} invalid rows")]
    NoUsableRows { dropped: usize },
    #[error("timestamps decrease at row {row}")]
    UnsortedTimestamps { row: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is constant")]
    ConstantColumn(String),
    #[error("too few rows: {rows} rows for {vars} variables (need at least {required})")]
    TooFewRows { rows: usize, vars: usize, required: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing state: {0}")]
    MissingState(String),
    #[error("graph invariant violated: {0}")]
    InvalidGraph(String),
    #[error("matrix (I - B) is singular")]
    SingularMatrix,
    #[error("degenerate marginal for `{0}`: first and third quartile coincide, pass explicit levels")]
    DegenerateMarginal(String),
    #[error("no tolerance entry for variable `{variable}` in cycle state `{state}`")]
    MissingTolerance { variable: String, state: String },
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("memory record rejected: {0}")]
    Schema(String),
    #[error("clock regression: {next} is earlier than {last}")]
    ClockRegression { last: f64, next: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularMatrix | Error::Numerical(_) => ErrorKind::Numerical,
            Error::UnknownVariable(_) => ErrorKind::NotFound,
            Error::MissingState(_) | Error::TooFewRows { .. } | Error::DegenerateMarginal(_) => {
                ErrorKind::Precondition
            }
            _ => ErrorKind::Data,
        }
    }
}
