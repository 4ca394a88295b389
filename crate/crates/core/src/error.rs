use std::path::PathBuf;

/// Crate-wide error type. Variants are grouped by the failing stage so the
/// CLI can map them onto exit codes (validation vs. runtime).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("parse error in {path} at byte {offset}: {reason}")]
    Parse {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("attack produced a non-finite gradient")]
    NonFiniteGradient,

    #[error("relative robustness undefined: no benign-correct examples")]
    UndefinedRelativeRobustness,

    #[error("covariance singular even after regularization; increase reg_eps")]
    SingularCovariance,

    #[error("fingerprint mismatch: {context}: {left} vs {right}")]
    FingerprintMismatch {
        context: String,
        left: String,
        right: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    /// True for errors caused by bad user input or malformed files, as
    /// opposed to failures arising while a computation runs.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Parse { .. }
                | Error::ShapeMismatch { .. }
                | Error::FingerprintMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
