use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed, missing or inconsistent inputs.
    Input,
    /// Inputs were readable but the computation could not proceed.
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("mask is degenerate: {0}")]
    DegenerateMask(String),
    #[error("image is {image_w}x{image_h} but mask is {mask_w}x{mask_h}")]
    NonMatchingDimensions {
        image_w: usize,
        image_h: usize,
        mask_w: usize,
        mask_h: usize,
    },
    #[error("chord list is empty")]
    EmptyChordList,
    #[error("raster dimensions must be positive and match the pixel count")]
    InvalidRaster,

    #[error("no side label source available for image `{0}`")]
    UnlabelableImage(String),

    #[error("image is empty")]
    EmptyImage,
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding contains non-finite values")]
    NonFiniteEmbedding,
    #[error("invalid embedder spec: {0}")]
    InvalidEmbedder(String),

    #[error("image `{0}` has no resolved side label")]
    MissingSideLabel(String),
    #[error("need at least 2 images, found {0}")]
    TooFewImages(usize),
    #[error("no embedding for image `{0}`")]
    MissingEmbedding(String),
    #[error("manifest has no {0} entries")]
    EmptySplit(&'static str),

    #[error("score list is empty")]
    EmptyScoreList,
    #[error("need at least {needed} scores per list, got {got}")]
    TooFewScores { needed: usize, got: usize },
    #[error("score list contains non-finite values")]
    NonFiniteScore,
    #[error("probe subject `{0}` does not appear in the gallery")]
    SubjectNotInGallery(String),
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("invalid metric parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rotation {0} deg outside [-60, 60]")]
    InvalidRotation(f64),

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("duplicate id `{id}` on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: u64,
        second_line: u64,
    },
    #[error("bad magic in embedding store {0}")]
    MagicMismatch(PathBuf),
    #[error("unsupported embedding store version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated or inconsistent file: {0}")]
    TruncatedFile(String),
    #[error("image decode error: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonMatchingDimensions { .. }
            | Error::InvalidRaster
            | Error::UnlabelableImage(_)
            | Error::MissingSideLabel(_)
            | Error::TooFewImages(_)
            | Error::EmptySplit(_)
            | Error::SubjectNotInGallery(_)
            | Error::EmptyGallery
            | Error::MissingEmbedding(_)
            | Error::InvalidEmbedder(_)
            | Error::InvalidParameter(_)
            | Error::InvalidConfig(_)
            | Error::InvalidRotation(_)
            | Error::Parse { .. }
            | Error::DuplicateId { .. }
            | Error::MagicMismatch(_)
            | Error::UnsupportedVersion(_)
            | Error::TruncatedFile(_)
            | Error::Image(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_) => ErrorKind::Input,
            _ => ErrorKind::Computation,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
