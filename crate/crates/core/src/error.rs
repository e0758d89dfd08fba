use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: axis {axis} out of range for rank {rank}")]
    AxisOutOfRange {
        op: &'static str,
        axis: usize,
        rank: usize,
    },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("batch norm in eval mode has no running statistics")]
    MissingRunningStats,

    #[error("{what}: requested {requested} but only {available} available")]
    InsufficientPoints {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("degenerate triangle")]
    DegenerateTriangle,

    #[error("mesh has no valid faces")]
    EmptyMesh,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("non-finite loss {value} at step {step}")]
    NonFiniteLoss { step: u64, value: f32 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
