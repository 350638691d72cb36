use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("calibration constant must be positive and finite, got {0}")]
    Calibration(f64),

    #[error("expected {expected} samples per window, got {got}")]
    WindowSize { expected: usize, got: usize },

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("geodesic inverse did not converge after {iterations} iterations (near-antipodal points?)")]
    Convergence { iterations: usize },

    #[error("schema: {0}")]
    Schema(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },

    #[error("model has no normalizer attached")]
    MissingNormalizer,

    #[error("no complete {length_s} s outage sequence available")]
    NoSequences { length_s: usize },

    #[error("unsupported model file version {0}")]
    Version(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::Convergence { .. })
    }
}
