use thiserror::Error;

/// Errors raised by the numerical kernels and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sample carries no spread (all values identical or quantiles tied).
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Covariate columns that are linear combinations of earlier columns.
    #[error("rank-deficient {predictor} covariates, collinear columns: {columns:?}")]
    Collinear { predictor: String, columns: Vec<String> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    /// A quadrature failed to reach its tolerance, typically because the
    /// integrand is not integrable (e.g. an infinite-mean tail).
    #[error("integral did not converge: {0}")]
    Divergent(String),

    #[error("station {station}: {source}")]
    Station {
        station: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_station(self, station: &str) -> Self {
        Error::Station {
            station: station.to_string(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {value}")))
    }
}
