//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset validation, matrix construction, the
/// eigensolver, and file ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// Two matrices or domains that must agree in one dimension do not.
    #[error("dimension mismatch ({context}): expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A domain with zero samples was supplied.
    #[error("domain has no samples")]
    EmptyDomain,

    /// A label violates the 1..=C contract.
    #[error("bad label: {0}")]
    BadLabel(String),

    /// A feature value is NaN or infinite.
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// RBF bandwidth must be strictly positive.
    #[error("rbf gamma must be positive, got {0}")]
    NonpositiveGamma(f64),

    /// A configuration field is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Cholesky factorization failed even after ridge conditioning.
    #[error("matrix is not positive definite, even after ridge conditioning")]
    NotPositiveDefinite,

    /// The constraint matrix B cannot support the requested number of
    /// constraint-orthonormal directions.
    #[error("constraint matrix has rank {rank}, cannot extract {requested} directions")]
    RankDeficientB { rank: usize, requested: usize },

    /// k exceeds the number of reference points.
    #[error("k = {k} exceeds the {available} available reference points")]
    KTooLarge { k: usize, available: usize },

    /// Two vectors that must have equal length do not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A field of a data file failed to parse. Line and column are 1-based
    /// and 0-based respectively, matching the dense-csv interface.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A CSV row has a different field count than the first row.
    #[error("ragged row at line {line}: expected {expected} fields, got {actual}")]
    RaggedRow {
        line: usize,
        expected: usize,
        actual: usize,
    },

    /// A data file is not in a recognized format.
    #[error("unrecognized data format: {0}")]
    BadFormat(String),

    /// A sweep grid point failed; wraps the underlying fit error.
    #[error("fit failed at mu = {mu}: {source}")]
    AtMu {
        mu: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
