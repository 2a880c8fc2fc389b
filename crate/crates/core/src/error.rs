use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "quadrature did not converge at tau = {tau_fs} fs after {points} points \
         (last two estimates {previous} and {last})"
    )]
    Convergence {
        tau_fs: f64,
        points: usize,
        previous: Complex64,
        last: Complex64,
    },

    #[error("peak search failed: {0}")]
    Search(String),

    #[error("sweep failed at beta = {beta_fs} fs: {source}")]
    Sweep {
        beta_fs: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("curve under-sampled: {0}")]
    Resolution(String),

    #[error("integration window not converged: {0}")]
    Window(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Strips any sweep context and returns the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sweep { source, .. } => source.root(),
            other => other,
        }
    }
}
