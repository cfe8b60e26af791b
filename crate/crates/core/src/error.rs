use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A chain left the finite region (or crossed the divergence guard).
    #[error("chain diverged at step {step}; last finite state {last_finite:?}")]
    Divergence { step: usize, last_finite: Vec<f64> },

    #[error("{0} requires a Hessian Lipschitz constant (l_tilde)")]
    MissingCapability(&'static str),

    #[error("target precision unreachable: {0}")]
    Infeasible(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::Divergence { .. } | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
