use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported Bessel order {0} (supported: 1, 2, 3)")]
    UnsupportedOrder(i32),

    #[error("quadrature did not converge after {subdivisions} subdivisions (error estimate {error_estimate:e})")]
    Convergence {
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("insufficient data: {got} vectors, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("rejection sampler infeasible: acceptance rate {rate:e} after {attempts} attempts; recalibrate lambda or widen epsilon")]
    Infeasible { rate: f64, attempts: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
