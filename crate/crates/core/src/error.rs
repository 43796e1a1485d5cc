use std::path::PathBuf;

/// Errors raised by the reconstruction kernels.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: byte offset {offset}: {message}")]
    Binary {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at iteration {iteration} (lr={learning_rate}, L={n_freqs}): {reason}")]
    Diverged {
        iteration: usize,
        learning_rate: f64,
        n_freqs: u32,
        reason: String,
    },

    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("png: {0}")]
    Png(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}
