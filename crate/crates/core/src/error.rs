use thiserror::Error;

/// Errors produced by model construction, scheduling and analysis.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity is outside its allowed domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A schedule or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A Bloch trajectory does not return to its starting point.
    #[error("trajectory is not closed (gap {gap:.3e})")]
    NonClosedLoop { gap: f64 },

    /// The tracked subspace carries too little population to extract a
    /// Bloch vector.
    #[error("degenerate Bloch extraction at t = {t}: subspace norm {norm:.3e}")]
    DegenerateExtraction { t: f64, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
