use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed mesh: {reason}")]
    MalformedMesh { path: PathBuf, reason: String },

    #[error("{path}: mesh has no triangles after dropping degenerate faces")]
    EmptyMesh { path: PathBuf },

    #[error("mesh has zero extent (all vertices coincide)")]
    ZeroExtent,

    #[error("point at or behind the principal plane (z = {z})")]
    BehindDevice { z: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("raster size mismatch: {left:?} vs {right:?}")]
    SizeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("carrier band overlaps the spectrum edge: {0}")]
    SpectrumOverlap(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("image codec: {0}")]
    Codec(String),

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
