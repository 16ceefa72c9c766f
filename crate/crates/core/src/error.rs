use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain where the model is defined (non-finite values,
    /// non-positive mass or dilation, out-of-range dilated time).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Integration of the reference produced non-finite values.
    #[error("reference diverged on interval {interval}: {reason}")]
    DivergedReference { interval: usize, reason: String },

    #[error("problem build error: {0}")]
    Build(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure (non-finite iterate) at PIPG iteration {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("SCP iteration {iteration}: {source}")]
    Scp {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn build(msg: impl Into<String>) -> Self {
        Error::Build(msg.into())
    }
}
