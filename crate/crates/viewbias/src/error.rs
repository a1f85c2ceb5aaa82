use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate skeleton: total bone length is zero")]
    DegenerateSkeleton,

    #[error("degenerate torso triangle: body frame is undefined")]
    DegenerateFrame,

    #[error("joint {joint} has depth {z} mm, behind the camera")]
    BehindCamera { joint: usize, z: f64 },

    #[error("matrix is not a proper rotation (orthonormality residual {residual:.3e})")]
    NotARotation { residual: f64 },

    #[error("zero quaternion has no direction")]
    ZeroQuaternion,

    #[error("pelvis coincides with the camera origin")]
    PelvisAtOrigin,

    #[error("k-means needs at least {k} distinct quaternions, got {distinct}")]
    TooFewPoints { k: usize, distinct: usize },

    #[error("scope {0:?} selects no records")]
    EmptyScope(String),

    #[error("classification loss requires a fitted cluster model")]
    MissingClusterModel,

    #[error("input is empty")]
    EmptyInput,

    #[error("degenerate point set: joints are collinear")]
    CollinearJoints,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("unknown profile {0:?}; valid profiles: {1}")]
    UnknownProfile(String, String),

    #[error("unknown feature mode {0:?}")]
    UnknownFeatureMode(String),

    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("invalid record on line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
