//! Core pose data model: joint naming, root-relative conversion, bone
//! lengths, skeleton-size normalization, and the pinhole projection pair.
//!
//! Every pose is 14 named 3D joint positions in camera coordinates,
//! millimeters, with the computer-vision axis convention x-right, y-down,
//! z-forward. Joint order is fixed crate-wide by [`JOINT_NAMES`].

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Number of joints in the shared skeleton.
pub const NUM_JOINTS: usize = 14;

/// Index of the root joint (pelvis) in the canonical ordering.
pub const PELVIS: usize = 0;

/// Canonical joint ordering, fixed for every file format and array layout
/// in this crate.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "neck",
    "head",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
];

pub const NECK: usize = 1;
pub const HEAD: usize = 2;
pub const L_SHOULDER: usize = 3;
pub const R_SHOULDER: usize = 4;
pub const L_ELBOW: usize = 5;
pub const R_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;
pub const R_WRIST: usize = 8;
pub const L_HIP: usize = 9;
pub const R_HIP: usize = 10;
pub const L_KNEE: usize = 11;
pub const R_KNEE: usize = 12;
pub const L_ANKLE: usize = 13;

/// The 13 parent -> child bone pairs, a tree rooted at the pelvis that
/// spans all 14 joints.
pub const BONES: [(usize, usize); 13] = [
    (PELVIS, NECK),
    (NECK, HEAD),
    (NECK, L_SHOULDER),
    (NECK, R_SHOULDER),
    (L_SHOULDER, L_ELBOW),
    (L_ELBOW, L_WRIST),
    (R_SHOULDER, R_ELBOW),
    (R_ELBOW, R_WRIST),
    (PELVIS, L_HIP),
    (PELVIS, R_HIP),
    (L_HIP, L_KNEE),
    (R_HIP, R_KNEE),
    (L_KNEE, L_ANKLE),
];

/// Default skeleton-size target for [`normalize_skeleton`], millimeters.
pub const DEFAULT_BONE_SUM_MM: f64 = 3700.0;

/// 14 joint positions in camera coordinates, millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pose {
    pub joints: [Vec3; NUM_JOINTS],
}

impl Pose {
    pub fn new(joints: [Vec3; NUM_JOINTS]) -> Self {
        Pose { joints }
    }

    pub fn zeros() -> Self {
        Pose {
            joints: [[0.0; 3]; NUM_JOINTS],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.joints.iter().flatten().all(|c| c.is_finite())
    }

    /// Flattens to 42 values in joint order (x, y, z per joint).
    pub fn flatten(&self) -> [f64; NUM_JOINTS * 3] {
        let mut out = [0.0; NUM_JOINTS * 3];
        for (j, p) in self.joints.iter().enumerate() {
            out[3 * j..3 * j + 3].copy_from_slice(p);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != NUM_JOINTS * 3 {
            return Err(Error::ShapeMismatch {
                expected: NUM_JOINTS * 3,
                got: flat.len(),
            });
        }
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (j, p) in joints.iter_mut().enumerate() {
            p.copy_from_slice(&flat[3 * j..3 * j + 3]);
        }
        Ok(Pose { joints })
    }
}

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// One annotated sample. This struct is the JSONL line format consumed and
/// produced by every CLI command: joint order is the canonical
/// [`JOINT_NAMES`] order, coordinates are millimeters (3D) and pixels (2D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub dataset: String,
    pub subject: String,
    pub frame: u64,
    pub intrinsics: CameraIntrinsics,
    pub joints3d: Pose,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joints2d: Option<[[f64; 2]; NUM_JOINTS]>,
    pub pelvis_synthesized: bool,
}

/// Subtracts the pelvis from every joint; the output pelvis is the origin.
pub fn root_relative(pose: &Pose) -> Pose {
    let root = pose.joints[PELVIS];
    let mut out = *pose;
    for p in &mut out.joints {
        *p = vec3::sub(*p, root);
    }
    out
}

/// Sum of the Euclidean lengths of the 13 bone segments, millimeters.
pub fn bone_length_sum(pose: &Pose) -> f64 {
    BONES
        .iter()
        .map(|&(a, b)| vec3::norm(vec3::sub(pose.joints[b], pose.joints[a])))
        .sum()
}

/// Uniformly scales the root-relative pose so its bone-length sum equals
/// `target_sum_mm`. The pelvis stays at the origin.
pub fn normalize_skeleton(pose: &Pose, target_sum_mm: f64) -> Result<Pose> {
    let rel = root_relative(pose);
    let sum = bone_length_sum(&rel);
    if sum <= 0.0 || !sum.is_finite() {
        return Err(Error::DegenerateSkeleton);
    }
    let s = target_sum_mm / sum;
    let mut out = rel;
    for p in &mut out.joints {
        *p = vec3::scale(s, *p);
    }
    Ok(out)
}

/// Projects every joint through the pinhole model: u = fx*x/z + cx,
/// v = fy*y/z + cy. Errors if any joint lies at or behind the camera.
pub fn project_to_2d(pose: &Pose, k: &CameraIntrinsics) -> Result<[[f64; 2]; NUM_JOINTS]> {
    let mut out = [[0.0; 2]; NUM_JOINTS];
    for (j, p) in pose.joints.iter().enumerate() {
        let [x, y, z] = *p;
        if z <= 0.0 {
            return Err(Error::BehindCamera { joint: j, z });
        }
        out[j] = [k.fx * x / z + k.cx, k.fy * y / z + k.cy];
    }
    Ok(out)
}

/// Inverse of [`project_to_2d`] given per-joint depths in millimeters.
pub fn back_project(
    kp2d: &[[f64; 2]; NUM_JOINTS],
    z: &[f64; NUM_JOINTS],
    k: &CameraIntrinsics,
) -> Result<Pose> {
    let mut joints = [[0.0; 3]; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        let depth = z[j];
        if depth <= 0.0 {
            return Err(Error::BehindCamera { joint: j, z: depth });
        }
        let [u, v] = kp2d[j];
        joints[j] = [
            (u - k.cx) * depth / k.fx,
            (v - k.cy) * depth / k.fy,
            depth,
        ];
    }
    Ok(Pose::new(joints))
}

/// Reads pose records from a JSONL file, one record per line.
pub fn read_jsonl(path: &Path) -> Result<Vec<PoseRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PoseRecord =
            serde_json::from_str(&line).map_err(|e| Error::InvalidRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if let Some(ref kp) = record.joints2d {
            if kp.len() != NUM_JOINTS {
                return Err(Error::InvalidRecord {
                    line: i + 1,
                    reason: format!("joints2d has {} entries", kp.len()),
                });
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes pose records as JSONL, one record per line.
pub fn write_jsonl(path: &Path, records: &[PoseRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
