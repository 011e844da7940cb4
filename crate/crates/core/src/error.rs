use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what}: series did not converge within {terms} terms")]
    SeriesNonConvergence { what: &'static str, terms: usize },

    #[error("laplace inversion failed at t = {t}: {reason}")]
    Inversion { t: f64, reason: String },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("ODE integration failed at t = {t}: {reason}")]
    Ode { t: f64, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_))
    }
}
