use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped loosely into data problems (bad shapes, missing
/// values, unparsable input) and numerical problems (singular systems,
/// divergent limits, stalled samplers). [`Error::is_data_error`] exposes that
/// split for callers that map errors onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: f64, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    SingularCovariance { index: usize, pivot: f64 },

    #[error("regressors are collinear: {0}")]
    CollinearRegressors(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("extrapolated limit does not converge (last correction {correction:e})")]
    LimitDiverged { estimate: f64, correction: f64 },

    #[error("posterior mass {mass:e} at the grid boundary; widen the grid")]
    GridTooNarrow { mass: f64 },

    #[error("residuals fit exactly (zero sum of squares)")]
    DegenerateFit,

    #[error("chain failed after {attempts} consecutive linear-algebra failures: {last}")]
    ChainFailed { attempts: usize, last: String },

    #[error("rejection sampler stalled: {accepted} acceptances in {attempts} attempts")]
    GenerationStalled { attempts: u64, accepted: u64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing value at row {row}, column {column} ({label})")]
    MissingData {
        row: usize,
        column: usize,
        label: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for problems with the input data or configuration, as opposed
    /// to numerical failures during inference.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::InsufficientData(_)
                | Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::MissingData { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
