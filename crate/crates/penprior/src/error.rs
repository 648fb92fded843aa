use thiserror::Error;

/// Errors shared across the derivation, divergence and planning modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported penalty: {0}")]
    UnsupportedPenalty(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("non-normalizable prior: {0}")]
    NonNormalizablePrior(String),

    #[error("ill-conditioned deconvolution at frequency {frequency}: |F beta| = {magnitude:e}")]
    IllConditionedDeconvolution { frequency: f64, magnitude: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("rescaling needed: {0}")]
    RescalingNeeded(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("derivation failed for nu = {nu:?}: {source}")]
    NuDerivation {
        nu: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
