use std::path::PathBuf;

use thiserror::Error;

use crate::vocab::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask dimensions differ: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("structuring element side must be odd and positive, got {0}")]
    EvenStructuringElement(usize),

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid token ({row}, {col}) out of range for a {n}x{n} grid")]
    TokenOutOfRange { row: u32, col: u32, n: u32 },

    #[error("point ({x}, {y}) outside the {width}x{height} image")]
    PointOutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("invalid proposal set: {0}")]
    InvalidProposals(String),

    #[error("too many proposals for exhaustive search: {0} (limit 12)")]
    TooManyProposals(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

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

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
