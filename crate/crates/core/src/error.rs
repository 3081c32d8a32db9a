use std::path::PathBuf;

/// Errors surfaced by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no valid geometry")]
    NoValidGeometry,

    #[error("degenerate hand frame")]
    DegenerateHandFrame,

    #[error("degenerate hand configuration")]
    DegenerateHandConfiguration,

    #[error("degenerate spec: {0}")]
    DegenerateSpec(String),

    #[error("voxel {0} is empty")]
    EmptyVoxel(usize),

    #[error("no supervision")]
    NoSupervision,

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("config drift: checkpoint hash {checkpoint}, run config hash {config}")]
    ConfigDrift { checkpoint: String, config: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
