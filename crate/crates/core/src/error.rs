use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("enclosure failure: {0}")]
    Enclosure(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cell {coords:?} is outside a grid of resolution {resolution:?}")]
    CellOutOfRange { coords: Vec<usize>, resolution: Vec<usize> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported dimension {0}; only planar grids are supported here")]
    UnsupportedDimension(usize),

    #[error("cell set is not strongly connected ({components} components over {cells} cells)")]
    NotStronglyConnected { components: usize, cells: usize },

    #[error("trajectory diverged to a non-finite value")]
    Diverged,

    #[error("empty cell set")]
    EmptySet,

    #[error("zero standard deviation in feature column `{column}`")]
    ZeroVariance { column: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing upstream artifact {path}: {what}")]
    MissingArtifact { path: PathBuf, what: String },

    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.to_string(),
        }
    }
}
