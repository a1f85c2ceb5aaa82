//! Body-centered viewpoint geometry for 3D human pose.
//!
//! The crate factors camera-relative 3D pose into a body-centered coordinate
//! frame (anchored at the pelvis, oriented by the torso) and the camera
//! viewpoint relative to that frame, expressed as a unit quaternion or as
//! azimuth/elevation. On top of this geometry it provides:
//!
//! - k-means clustering of viewpoint quaternions ([`view_cluster`]),
//! - pose and viewpoint losses with analytic gradients ([`heads_losses`]),
//! - MPJPE / PA-MPJPE / PCK3D evaluation metrics ([`metrics`]),
//! - a synthetic pose generator with per-dataset viewpoint bias profiles
//!   ([`synth`]),
//! - a small multi-task network trained from 2D keypoints ([`toy_net`]),
//! - dataset statistics and distribution reports ([`analysis`]),
//! - the `viewbias` CLI binding everything together ([`cli`]).
//!
//! All randomness flows from explicit seeds; every operation is
//! deterministic given its inputs.

pub mod analysis;
pub mod body_frame;
pub mod cli;
mod error;
pub mod heads_losses;
pub mod metrics;
pub mod skeleton;
pub mod synth;
pub mod toy_net;
pub(crate) mod vec3;
pub mod view_cluster;

pub use error::{Error, Result};
