//! Evaluation metrics: MPJPE, PA-MPJPE via similarity Procrustes
//! alignment, and PCK3D.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::skeleton::{root_relative, Pose, NUM_JOINTS};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Default PCK3D threshold, millimeters.
pub const PCK3D_THRESHOLD_MM: f64 = 150.0;

/// Aggregate evaluation over a batch of pose pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mpjpe_mm: f64,
    pub pa_mpjpe_mm: f64,
    /// Fraction of (sample, joint) pairs under the PCK threshold.
    pub pck3d: f64,
    pub n_samples: usize,
    pub per_joint_mpjpe_mm: Vec<f64>,
    pub per_joint_pck3d: Vec<f64>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if self.pa_mpjpe_mm > self.mpjpe_mm + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "PA-MPJPE {} exceeds MPJPE {}",
                self.pa_mpjpe_mm, self.mpjpe_mm
            )));
        }
        if !(0.0..=1.0).contains(&self.pck3d) {
            return Err(Error::InvalidArgument(format!(
                "PCK3D {} outside [0, 1]",
                self.pck3d
            )));
        }
        Ok(())
    }
}

/// Similarity transform `x -> scale * R * x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: [[f64; 3]; 3],
    pub scale: f64,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        [
            self.scale * (r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2]) + self.translation[0],
            self.scale * (r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2]) + self.translation[1],
            self.scale * (r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2]) + self.translation[2],
        ]
    }
}

/// Per-joint Euclidean errors between two poses.
pub fn per_joint_errors(pred: &Pose, gt: &Pose) -> [f64; NUM_JOINTS] {
    std::array::from_fn(|j| vec3::norm(vec3::sub(pred.joints[j], gt.joints[j])))
}

/// Mean per-joint position error, millimeters. Both poses are expected to
/// be root-relative.
pub fn mpjpe(pred: &Pose, gt: &Pose) -> f64 {
    per_joint_errors(pred, gt).iter().sum::<f64>() / NUM_JOINTS as f64
}

fn is_collinear(points: &[Vec3]) -> bool {
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold([0.0; 3], |acc, p| vec3::add(acc, *p))
        .map(|c| c / n);
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(vec3::sub(*p, centroid));
        scatter += d * d.transpose();
    }
    let svals = scatter.svd(false, false).singular_values;
    let mut sorted = [svals[0], svals[1], svals[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[1] <= 1e-12 * sorted[0].max(1e-300)
}

/// Least-squares similarity alignment of `src` onto `dst`
/// (rotation via SVD with determinant correction, optimal scale,
/// translation). Errors when either point set is collinear.
pub fn procrustes_points(
    src: &[Vec3],
    dst: &[Vec3],
    with_scale: bool,
) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch {
            expected: src.len(),
            got: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 points".into()));
    }
    if is_collinear(src) || is_collinear(dst) {
        return Err(Error::CollinearJoints);
    }

    let n = src.len() as f64;
    let mu_src = src
        .iter()
        .fold([0.0; 3], |acc, p| vec3::add(acc, *p))
        .map(|c| c / n);
    let mu_dst = dst
        .iter()
        .fold([0.0; 3], |acc, p| vec3::add(acc, *p))
        .map(|c| c / n);

    let mut cross = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = Vector3::from(vec3::sub(*s, mu_src));
        let dc = Vector3::from(vec3::sub(*d, mu_dst));
        cross += dc * sc.transpose() / n;
        var_src += sc.norm_squared() / n;
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // Flip along the smallest singular value.
        let svals = svd.singular_values;
        let mut min_i = 0;
        for i in 1..3 {
            if svals[i] < svals[min_i] {
                min_i = i;
            }
        }
        sign[min_i] = -1.0;
    }
    let rotation_m = u * Matrix3::from_diagonal(&sign) * v_t;

    let trace_ds = svd.singular_values.dot(&sign);
    let scale = if with_scale { trace_ds / var_src } else { 1.0 };

    let mut rotation = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rotation[i][j] = rotation_m[(i, j)];
        }
    }
    let r_mu = [
        rotation[0][0] * mu_src[0] + rotation[0][1] * mu_src[1] + rotation[0][2] * mu_src[2],
        rotation[1][0] * mu_src[0] + rotation[1][1] * mu_src[1] + rotation[1][2] * mu_src[2],
        rotation[2][0] * mu_src[0] + rotation[2][1] * mu_src[1] + rotation[2][2] * mu_src[2],
    ];
    let translation = vec3::sub(mu_dst, vec3::scale(scale, r_mu));
    Ok(SimilarityTransform {
        rotation,
        scale,
        translation,
    })
}

/// Aligns `pred` onto `gt` with the optimal similarity transform and
/// returns the transformed pose together with the transform.
pub fn procrustes_align(pred: &Pose, gt: &Pose) -> Result<(Pose, SimilarityTransform)> {
    procrustes_align_with(pred, gt, true)
}

/// As [`procrustes_align`]; `with_scale = false` restricts to the rigid
/// (rotation + translation) alignment.
pub fn procrustes_align_with(
    pred: &Pose,
    gt: &Pose,
    with_scale: bool,
) -> Result<(Pose, SimilarityTransform)> {
    let transform = procrustes_points(&pred.joints, &gt.joints, with_scale)?;
    let mut aligned = *pred;
    for p in &mut aligned.joints {
        *p = transform.apply(*p);
    }
    Ok((aligned, transform))
}

/// MPJPE after Procrustes alignment.
pub fn pa_mpjpe(pred: &Pose, gt: &Pose) -> Result<f64> {
    let (aligned, _) = procrustes_align(pred, gt)?;
    Ok(mpjpe(&aligned, gt))
}

/// Fraction of (sample, joint) pairs whose Euclidean error is under the
/// threshold. Joints are counted independently.
pub fn pck3d(preds: &[Pose], gts: &[Pose], threshold_mm: f64) -> Result<f64> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(Error::EmptyInput);
    }
    let mut hits = 0usize;
    for (pred, gt) in preds.iter().zip(gts) {
        for err in per_joint_errors(pred, gt) {
            if err < threshold_mm {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (preds.len() * NUM_JOINTS) as f64)
}

/// Per-pose PCK3D variant: fraction of samples whose MPJPE is under the
/// threshold.
pub fn pck3d_per_pose(preds: &[Pose], gts: &[Pose], threshold_mm: f64) -> Result<f64> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(Error::EmptyInput);
    }
    let hits = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| mpjpe(p, g) < threshold_mm)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Full evaluation over a batch. Both sides are re-rooted at the pelvis
/// before comparison.
pub fn evaluate_batch(preds: &[Pose], gts: &[Pose], threshold_mm: f64) -> Result<EvalReport> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(Error::EmptyInput);
    }
    let preds: Vec<Pose> = preds.iter().map(root_relative).collect();
    let gts: Vec<Pose> = gts.iter().map(root_relative).collect();

    let n = preds.len();
    let mut per_joint_sum = [0.0f64; NUM_JOINTS];
    let mut per_joint_hits = [0usize; NUM_JOINTS];
    let mut pa_sum = 0.0;
    for (pred, gt) in preds.iter().zip(&gts) {
        for (j, err) in per_joint_errors(pred, gt).into_iter().enumerate() {
            per_joint_sum[j] += err;
            if err < threshold_mm {
                per_joint_hits[j] += 1;
            }
        }
        pa_sum += pa_mpjpe(pred, gt)?;
    }

    let per_joint_mpjpe_mm: Vec<f64> = per_joint_sum.iter().map(|s| s / n as f64).collect();
    let per_joint_pck3d: Vec<f64> = per_joint_hits.iter().map(|h| *h as f64 / n as f64).collect();
    let report = EvalReport {
        mpjpe_mm: per_joint_mpjpe_mm.iter().sum::<f64>() / NUM_JOINTS as f64,
        pa_mpjpe_mm: pa_sum / n as f64,
        pck3d: per_joint_hits.iter().sum::<usize>() as f64 / (n * NUM_JOINTS) as f64,
        n_samples: n,
        per_joint_mpjpe_mm,
        per_joint_pck3d,
    };
    Ok(report)
}
