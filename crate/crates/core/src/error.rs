use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x:.3}, {y:.3}, {z:.3}) lies outside the workspace")]
    OutOfWorkspace { x: f64, y: f64, z: f64 },

    #[error("malformed environment manifest: {0}")]
    Manifest(String),

    #[error("grid size mismatch in {file}: expected {expected} bytes, found {found}")]
    DimensionMismatch {
        file: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("scenario spec unsatisfiable after {attempts} attempts: {reason}")]
    UnsatisfiableSpec { attempts: u32, reason: String },

    #[error("start pose is invalid: {0}")]
    InvalidStart(String),

    #[error("instance too large for exhaustive enumeration: more than {limit} nodes")]
    InstanceTooLarge { limit: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
