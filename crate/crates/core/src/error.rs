use std::io;

use thiserror::Error;

use crate::fitter::FitTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("silhouette has no foreground pixel")]
    AllBackground,
    #[error("point projects at or behind the camera plane (depth {depth})")]
    InvalidProjection { depth: f64 },
    #[error("no views supplied")]
    EmptyViews,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("bounding box is degenerate")]
    DegenerateBox,
    #[error("view produced no foreground pixel")]
    DegenerateView,
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize, trace: Box<FitTrace> },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
