use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by ingestion, metric and simulation routines.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{path}: cannot read input: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: label {label:?} is not in the label scheme")]
    SchemaViolation { line: u64, label: String },
    #[error("line {line}: duplicate record for document {doc_id:?}, run {run_id:?}")]
    DuplicateRecord {
        line: u64,
        doc_id: String,
        run_id: String,
    },
    #[error("line {line}: value {value:?} is not finite")]
    NonFinite { line: u64, value: String },
    #[error("invalid label scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid dimensions: {0}")]
    Shape(String),
    #[error("at least 2 runs are required, got {0}")]
    InsufficientRuns(usize),
    #[error("at least {required} ratings are required, got {got}")]
    InsufficientRatings { required: usize, got: usize },
    #[error("matrix is incomplete: {0}")]
    IncompleteMatrix(String),
    #[error("runs {run_a} and {run_b} share no rated document")]
    EmptyOverlap { run_a: usize, run_b: usize },
    #[error("Krippendorff's alpha is undefined: no unit carries 2 or more ratings")]
    UndefinedAlpha,
    #[error("ICC is undefined: {0}")]
    UndefinedIcc(String),
    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("cosine similarity is undefined for a zero vector")]
    UndefinedSimilarity,
    #[error("tie between {0:?} cannot be resolved without ordinal codes or a tie-break order")]
    UnresolvableTie(Vec<String>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("standardization needs a non-constant vector of at least 2 values")]
    DegenerateStandardization,
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("division by zero: {0}")]
    Division(String),
    #[error("documents not found in the run matrix: {0:?}")]
    Join(Vec<String>),
    #[error("invalid human agreement record: {0}")]
    InvalidHumanRecord(String),
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;
