use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite after adding ridge {ridge:e}")]
    Singular { ridge: f64 },

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("training diverged in epoch {epoch} (non-finite weights)")]
    Diverged { epoch: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("label value {label} out of range for {class_count} classes")]
    LabelRange { label: usize, class_count: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from numerics rather than from input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::NoConvergence { .. } | Error::Diverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
