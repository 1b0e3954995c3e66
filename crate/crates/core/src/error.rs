use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("E is not block-diagonal over the (n_h, n_v) partition; nonzero coupling entries: {}", format_entries(.entries))]
    NonBlockDiagonalE { entries: Vec<(usize, usize, f64)> },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error ({context}): {message}")]
    Parse { context: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("exact expansion is limited to n <= {limit}, got n = {n}")]
    SizeLimit { n: usize, limit: usize },

    #[error("system is not regular: det(E I(z1, z2) - A) vanishes identically")]
    NotRegular,

    #[error("LMI variant {0} is not available for synthesis (bilinear in P and K)")]
    VariantUnsupported(String),

    #[error("model has no inputs (m = 0)")]
    NoActuation,

    #[error("model has no outputs (p = 0)")]
    NoMeasurement,

    #[error("malformed problem: {0}")]
    BadProblem(String),

    #[error("solver backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("gain recovery inconsistent: {0}")]
    RecoveryInconsistent(String),

    #[error("algebraic states are not pointwise solvable (condition number {condition:.3e})")]
    NonCausalPointwise { condition: f64 },

    #[error("boundary data mismatch: {0}")]
    BoundaryDimensionMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    /// Stable machine-readable code used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::NonBlockDiagonalE { .. } => "NON_BLOCK_DIAGONAL_E",
            Error::NonFinite(_) => "NON_FINITE",
            Error::Parse { .. } => "PARSE",
            Error::Schema(_) => "SCHEMA",
            Error::Io(_) => "IO",
            Error::SizeLimit { .. } => "SIZE_LIMIT",
            Error::NotRegular => "NOT_REGULAR",
            Error::VariantUnsupported(_) => "VARIANT_UNSUPPORTED",
            Error::NoActuation => "NO_ACTUATION",
            Error::NoMeasurement => "NO_MEASUREMENT",
            Error::BadProblem(_) => "BAD_PROBLEM",
            Error::Backend { .. } => "BACKEND",
            Error::RecoveryInconsistent(_) => "RECOVERY_INCONSISTENT",
            Error::NonCausalPointwise { .. } => "NON_CAUSAL_POINTWISE",
            Error::BoundaryDimensionMismatch(_) => "BOUNDARY_DIMENSION_MISMATCH",
            Error::InvalidParams(_) => "INVALID_PARAMS",
        }
    }
}

fn format_entries(entries: &[(usize, usize, f64)]) -> String {
    entries
        .iter()
        .map(|(i, j, v)| format!("E[{i}][{j}] = {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}
