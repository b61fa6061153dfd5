use thiserror::Error;

/// Errors raised by the evaluators, samplers and checkers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KlsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-smooth point: {0}")]
    NonSmoothPoint(String),
    #[error("curvature unsupported: {0}")]
    UnsupportedCurvature(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),
    #[error("rejection acceptance {acceptance:.3e} too low, use hit-and-run")]
    MethodSwitch { acceptance: f64 },
    #[error("degenerate normal: <x, nu> = {0:.3e}")]
    DegenerateNormal(f64),
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),
    #[error("grid resolution: {0}")]
    Resolution(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KlsError {
    fn from(e: std::io::Error) -> Self {
        KlsError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for KlsError {
    fn from(e: serde_json::Error) -> Self {
        KlsError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KlsError>;

pub(crate) fn ensure_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KlsError::InvalidInput("non-finite coordinate".into()))
    }
}
