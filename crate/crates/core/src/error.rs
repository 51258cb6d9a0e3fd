use thiserror::Error;

/// Errors raised across the packing, mean-field and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RapError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("packing saturated: no free nucleation site found after {attempts} attempts")]
    Saturation { attempts: u64 },

    #[error(
        "root finder did not converge after {iterations} iterations (max residual {residual:.3e})"
    )]
    Convergence { iterations: usize, residual: f64 },

    #[error("fit did not converge (chi2 {chi2:.6e} at lambda={lambda}, b={b}, c={c})")]
    FitConvergence {
        lambda: f64,
        b: f64,
        c: f64,
        chi2: f64,
    },

    #[error("solution outside its validity domain: {0}")]
    Validity(String),

    #[error("model validity: {0}")]
    ModelValidity(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RapError {
    fn from(err: std::io::Error) -> Self {
        RapError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for RapError {
    fn from(err: serde_json::Error) -> Self {
        RapError::Io(err.to_string())
    }
}

pub type Result<T, E = RapError> = std::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::error::RapError::Domain(format!($($arg)*))
    };
}
pub(crate) use domain;
