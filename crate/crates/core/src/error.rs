use thiserror::Error;

/// Errors raised by the orthoplex library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("(d, n) = ({d}, {n}) is outside the orthoplex regime d+2 <= n <= 2d")]
    Regime { d: usize, n: usize },

    #[error("row {row} has norm {norm}, not within {tol:e} of 1")]
    NotUnit { row: usize, norm: f64, tol: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("points are affinely independent; no Radon partition exists")]
    NoPartition,

    #[error("coherence {coherence:e} exceeds tolerance {tol:e}; not a spherical code")]
    NotSphericalCode { coherence: f64, tol: f64 },

    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("threshold search failed: {0}")]
    Search(String),

    #[error("non-finite loss at iteration {iteration}")]
    Divergence { iteration: usize },
}

impl Error {
    /// Short machine-readable code, used in CLI error objects.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Argument(_) => "argument",
            Error::Regime { .. } => "regime",
            Error::NotUnit { .. } => "not_unit",
            Error::Domain(_) => "domain",
            Error::NoPartition => "no_partition",
            Error::NotSphericalCode { .. } => "not_spherical_code",
            Error::DecompositionFailure(_) => "decomposition_failure",
            Error::Search(_) => "search",
            Error::Divergence { .. } => "divergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_regime(d: usize, n: usize) -> Result<()> {
    if n < d + 2 || n > 2 * d {
        return Err(Error::Regime { d, n });
    }
    Ok(())
}
