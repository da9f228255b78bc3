use alloc::string::String;

/// Errors raised while configuring or running an iteration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside its admissible range, or a component is
    /// missing. The message names the violated bound.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("orbit index {0} is not available")]
    MissingOrbitIndex(usize),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    /// A non-finite iterate appeared at the given iteration.
    #[error("numerical divergence at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("certificate unavailable: {0}")]
    CertificateUnavailable(String),

    #[error("invalid reference point: {0}")]
    InvalidReference(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors that stem from the run itself rather than from its
    /// configuration.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
