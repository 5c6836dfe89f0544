use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin system `{label}`: {reason}")]
    InvalidSpec { label: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("non-integrable pole in two-phonon integral at q = {q:.6} rad (theta_D sin q = theta_E = {theta_e} K)")]
    Singularity { q: f64, theta_e: f64 },

    #[error("quadrature did not reach tolerance (estimated error {0:.3e})")]
    Quadrature(f64),

    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailure { iterations: usize, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Usage-level errors (bad parameters or config) vs data and numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::InvalidSpec { .. } | Error::Config(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian(_)
                | Error::Singularity { .. }
                | Error::Quadrature(_)
                | Error::FitFailure { .. }
                | Error::Domain(_)
        )
    }
}
