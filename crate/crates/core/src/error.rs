use thiserror::Error;

/// Errors raised by the forecasting core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid hierarchy plan: {0}")]
    HierarchyPlan(String),

    #[error("series too short: need more than {needed} observations, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("unknown meter `{0}`")]
    UnknownMeter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("no meter satisfies the selection rules")]
    NoMetersRetained,

    #[error("no weather forecast issuance covers {0}")]
    NwpGap(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("graphical lasso did not converge after {sweeps} sweeps (duality gap {gap:e})")]
    NonConvergence { sweeps: usize, gap: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Usage,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotPositiveDefinite | Error::NonConvergence { .. } | Error::Numeric(_) => {
                ErrorKind::Numeric
            }
            Error::InvalidArgument(_) | Error::HierarchyPlan(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
