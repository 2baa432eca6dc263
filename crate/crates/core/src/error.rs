use thiserror::Error;

/// Everything that can go wrong while building or evaluating a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbmError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error(
        "local bias is trivial: rho^z = delta_0 for mu-almost every z, all voters are independent"
    )]
    TrivialBias,

    #[error(
        "model is not sufficiently random: rho^z is a point mass at +1 or -1 for mu-almost every z"
    )]
    NotSufficientlyRandom,

    #[error("model is tightly correlated (1 - a = {one_minus_a:e}); optimal weights are only determined up to their sum")]
    TightlyCorrelated { one_minus_a: f64 },

    #[error("limit matrix is singular: two groups have <d^2> = 1 ({0})")]
    DegenerateHetero(String),

    #[error("matrix is singular or indefinite at pivot {pivot}")]
    SingularOrIndefinite { pivot: usize },

    #[error("finite-population matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}); the model is close to tight correlation")]
    NearTight { min_eigenvalue: f64 },

    #[error("tabulated kernel queried at z = {z} outside the grid [{lo}, {hi}]")]
    OutsideGrid { z: f64, lo: f64, hi: f64 },

    #[error("group {group} has {size} voters, above the exact-computation limit of {limit}")]
    SizeGuard { group: usize, size: u64, limit: u64 },

    #[error("non-finite integrand value at {at}")]
    NonFinite { at: f64 },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T, E = CbmError> = std::result::Result<T, E>;

impl CbmError {
    pub(crate) fn measure(msg: impl Into<String>) -> Self {
        CbmError::InvalidMeasure(msg.into())
    }

    pub(crate) fn kernel(msg: impl Into<String>) -> Self {
        CbmError::InvalidKernel(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        CbmError::InvalidModel(msg.into())
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        use CbmError::*;
        match self {
            InvalidMeasure(_)
            | InvalidKernel(_)
            | InvalidModel(_)
            | Config { .. }
            | SizeGuard { .. }
            | OutsideGrid { .. }
            | Unsupported(_) => ErrorKind::Input,
            TrivialBias
            | NotSufficientlyRandom
            | TightlyCorrelated { .. }
            | DegenerateHetero(_) => ErrorKind::Degenerate,
            SingularOrIndefinite { .. } | NearTight { .. } | NonFinite { .. } => {
                ErrorKind::Numerical
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Degenerate,
    Numerical,
}
