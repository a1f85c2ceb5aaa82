//! Mathematics of the trainable heads: soft-argmax decoding, the depth
//! quantization codec, the L1 pose loss, viewpoint classification and
//! regression losses, and the combined objective. Every loss returns its
//! analytic gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::body_frame::{quat_dot, quat_norm, Quat};
use crate::skeleton::{Pose, NUM_JOINTS};
use crate::view_cluster::ClusterModel;
use crate::{Error, Result};

/// Logits over a depth x height x width grid for one joint, with explicit
/// cell-center coordinates per axis.
#[derive(Debug, Clone)]
pub struct HeatmapGrid {
    pub logits: Vec<f64>,
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub x_coords: Vec<f64>,
    pub y_coords: Vec<f64>,
    pub z_coords: Vec<f64>,
}

impl HeatmapGrid {
    /// Grid with integer cell coordinates 0..n-1 per axis and zero logits.
    pub fn unit(depth: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            vec![0.0; depth * height * width],
            depth,
            height,
            width,
            (0..width).map(|i| i as f64).collect(),
            (0..height).map(|i| i as f64).collect(),
            (0..depth).map(|i| i as f64).collect(),
        )
    }

    /// Desk-scale default: 64 x 64 x 64 cells with coordinates 0..63.
    pub fn default_cube() -> Self {
        Self::unit(64, 64, 64).expect("static dimensions are valid")
    }

    pub fn new(
        logits: Vec<f64>,
        depth: usize,
        height: usize,
        width: usize,
        x_coords: Vec<f64>,
        y_coords: Vec<f64>,
        z_coords: Vec<f64>,
    ) -> Result<Self> {
        if depth == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument("grid dimensions must be >= 1".into()));
        }
        if logits.len() != depth * height * width {
            return Err(Error::ShapeMismatch {
                expected: depth * height * width,
                got: logits.len(),
            });
        }
        if x_coords.len() != width || y_coords.len() != height || z_coords.len() != depth {
            return Err(Error::InvalidArgument("axis coordinate lengths mismatch".into()));
        }
        if !logits.iter().all(|l| l.is_finite()) {
            return Err(Error::InvalidArgument("logits must be finite".into()));
        }
        Ok(HeatmapGrid {
            logits,
            depth,
            height,
            width,
            x_coords,
            y_coords,
            z_coords,
        })
    }

    #[inline]
    pub fn index(&self, iz: usize, iy: usize, ix: usize) -> usize {
        (iz * self.height + iy) * self.width + ix
    }

    fn softmax(&self) -> Vec<f64> {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = self.logits.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        probs
    }
}

/// Expected (x, y, z) cell-center coordinates under the softmax of the
/// logits.
pub fn soft_argmax(grid: &HeatmapGrid) -> [f64; 3] {
    soft_argmax_with_grad(grid).0
}

/// Soft-argmax plus the gradient of each output coordinate with respect to
/// every logit: `grads[i] = [d out_x / d logit_i, d out_y / ..., d out_z / ...]`.
pub fn soft_argmax_with_grad(grid: &HeatmapGrid) -> ([f64; 3], Vec<[f64; 3]>) {
    let probs = grid.softmax();
    let mut out = [0.0; 3];
    for iz in 0..grid.depth {
        for iy in 0..grid.height {
            for ix in 0..grid.width {
                let p = probs[grid.index(iz, iy, ix)];
                out[0] += p * grid.x_coords[ix];
                out[1] += p * grid.y_coords[iy];
                out[2] += p * grid.z_coords[iz];
            }
        }
    }
    let mut grads = vec![[0.0; 3]; probs.len()];
    for iz in 0..grid.depth {
        for iy in 0..grid.height {
            for ix in 0..grid.width {
                let i = grid.index(iz, iy, ix);
                let p = probs[i];
                grads[i] = [
                    p * (grid.x_coords[ix] - out[0]),
                    p * (grid.y_coords[iy] - out[1]),
                    p * (grid.z_coords[iz] - out[2]),
                ];
            }
        }
    }
    (out, grads)
}

/// Affine codec between metric depth and heatmap depth coordinates.
///
/// The continuous mapping sends (-z_max, +z_max) onto (0, bins-1); the
/// binned mapping quantizes into `bins` equal cells of width
/// `2 z_max / bins` and reconstructs at cell centers, so its round-trip
/// error is at most half a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCodec {
    pub z_max: f64,
    pub bins: usize,
}

impl Default for DepthCodec {
    fn default() -> Self {
        DepthCodec {
            z_max: 2400.0,
            bins: 64,
        }
    }
}

impl DepthCodec {
    /// Continuous grid coordinate for a metric depth. Out-of-range depths
    /// clamp to the endpoints; the flag reports that a clamp happened.
    pub fn encode(&self, z_mm: f64) -> (f64, bool) {
        let clamped = z_mm.abs() > self.z_max;
        let z = z_mm.clamp(-self.z_max, self.z_max);
        let coord = (z + self.z_max) / (2.0 * self.z_max) * (self.bins as f64 - 1.0);
        (coord, clamped)
    }

    /// Affine inverse of [`DepthCodec::encode`].
    pub fn decode(&self, coord: f64) -> f64 {
        coord / (self.bins as f64 - 1.0) * 2.0 * self.z_max - self.z_max
    }

    /// Bin index for a metric depth; out-of-range depths clamp into the
    /// first or last bin.
    pub fn quantize(&self, z_mm: f64) -> (usize, bool) {
        let clamped = z_mm.abs() > self.z_max;
        let z = z_mm.clamp(-self.z_max, self.z_max);
        let raw = ((z + self.z_max) / (2.0 * self.z_max) * self.bins as f64).floor() as isize;
        let bin = raw.clamp(0, self.bins as isize - 1) as usize;
        (bin, clamped)
    }

    /// Center depth of a bin, millimeters.
    pub fn reconstruct(&self, bin: usize) -> f64 {
        let cell = 2.0 * self.z_max / self.bins as f64;
        -self.z_max + (bin as f64 + 0.5) * cell
    }
}

/// How the viewpoint loss is assembled: classification (`C`), regression
/// (`R`), or their sum (`C+R`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    Classification,
    Regression,
    Both,
}

impl LossMode {
    pub fn uses_classification(self) -> bool {
        matches!(self, LossMode::Classification | LossMode::Both)
    }

    pub fn uses_regression(self) -> bool {
        matches!(self, LossMode::Regression | LossMode::Both)
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossMode::Classification => "C",
            LossMode::Regression => "R",
            LossMode::Both => "C+R",
        };
        write!(f, "{s}")
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" => Ok(LossMode::Classification),
            "R" => Ok(LossMode::Regression),
            "C+R" => Ok(LossMode::Both),
            _ => Err(Error::InvalidArgument(format!(
                "mode must be C, R, or C+R, got {s:?}"
            ))),
        }
    }
}

/// Weighting of the combined objective `lambda_q * L_q + L_pose`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_q: f64,
    pub mode: LossMode,
    /// Sign of the classification score `sign * (mu_c . q)`. +1 scores
    /// nearest centers highest, consistent with the nearest-center cluster
    /// targets; -1 reproduces the distance-flavored softmax variant.
    pub score_sign: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_q: 0.5,
            mode: LossMode::Classification,
            score_sign: 1.0,
        }
    }
}

/// Mean over joints of the L1 distance between root-relative poses, plus
/// the gradient with respect to the prediction. The subgradient at exact
/// zero differences is 0.
pub fn pose_loss(pred: &Pose, target: &Pose) -> (f64, [[f64; 3]; NUM_JOINTS]) {
    let mut loss = 0.0;
    let mut grad = [[0.0; 3]; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        for c in 0..3 {
            let d = pred.joints[j][c] - target.joints[j][c];
            loss += d.abs();
            grad[j][c] = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            } / NUM_JOINTS as f64;
        }
    }
    (loss / NUM_JOINTS as f64, grad)
}

/// Canonicalizing normalization used inside the classification loss:
/// returns the unit direction, the scale factor (+-1 / norm), and the
/// pre-flip unit vector for the projector.
fn canonical_unit(q: Quat) -> Result<(Quat, f64, Quat)> {
    let n = quat_norm(q);
    if n < 1e-12 {
        return Err(Error::ZeroQuaternion);
    }
    let unit = q.map(|c| c / n);
    let flip = match unit.iter().find(|c| **c != 0.0) {
        Some(first) => {
            if *first < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
        None => return Err(Error::ZeroQuaternion),
    };
    Ok((unit.map(|c| flip * c), flip / n, unit))
}

/// Negative log-likelihood of the assigned cluster under the softmax of
/// `sign * (mu_c . q)`. The prediction is normalized and sign-canonicalized
/// internally, and the returned gradient is chained through that
/// normalization, so the loss is invariant to replacing `q_pred` by
/// `-q_pred`.
pub fn viewpoint_class_loss(
    q_pred: Quat,
    c_star: usize,
    model: &ClusterModel,
    sign: f64,
) -> Result<(f64, Quat)> {
    if c_star >= model.k {
        return Err(Error::InvalidArgument(format!(
            "cluster index {c_star} out of range for k={}",
            model.k
        )));
    }
    let (q, scale, unit) = canonical_unit(q_pred)?;

    let scores: Vec<f64> = model.centers.iter().map(|mu| sign * quat_dot(*mu, q)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let p_star = exps[c_star] / total;
    let loss = -p_star.ln();

    // d loss / d q_hat = sign * (sum_c p_c mu_c - mu_star)
    let mut g = [0.0; 4];
    for (c, mu) in model.centers.iter().enumerate() {
        let p = exps[c] / total;
        for i in 0..4 {
            g[i] += sign * p * mu[i];
        }
    }
    for i in 0..4 {
        g[i] -= sign * model.centers[c_star][i];
    }

    // Chain through q_hat = flip * q_pred / ||q_pred||:
    // d q_hat / d q_pred = (flip / n) * (I - unit unit^T).
    let g_dot_unit = quat_dot(g, unit);
    let grad = std::array::from_fn(|i| scale * (g[i] - g_dot_unit * unit[i]));
    Ok((loss, grad))
}

/// Squared Euclidean distance between unit quaternions, with gradient
/// `2 (q_pred - q_star)` (the normalization chain rule is the caller's).
pub fn viewpoint_reg_loss(q_pred: Quat, q_star: Quat) -> (f64, Quat) {
    let mut loss = 0.0;
    let mut grad = [0.0; 4];
    for i in 0..4 {
        let d = q_pred[i] - q_star[i];
        loss += d * d;
        grad[i] = 2.0 * d;
    }
    (loss, grad)
}

/// Combined objective value and gradients.
#[derive(Debug, Clone, Copy)]
pub struct CombinedLoss {
    pub total: f64,
    pub pose_term: f64,
    pub view_term: f64,
    pub grad_pose: [[f64; 3]; NUM_JOINTS],
    pub grad_q: Quat,
}

/// `lambda_q * L_q + L_pose`, where `L_q` follows `weights.mode`.
/// Classification modes require a fitted cluster model.
#[allow(clippy::too_many_arguments)]
pub fn combined_loss(
    pred_pose: &Pose,
    target_pose: &Pose,
    q_pred: Quat,
    c_star: usize,
    q_star: Quat,
    weights: &LossWeights,
    model: Option<&ClusterModel>,
) -> Result<CombinedLoss> {
    let (pose_term, grad_pose) = pose_loss(pred_pose, target_pose);

    let mut view_term = 0.0;
    let mut grad_q = [0.0; 4];
    if weights.mode.uses_classification() {
        let model = model.ok_or(Error::MissingClusterModel)?;
        let (l, g) = viewpoint_class_loss(q_pred, c_star, model, weights.score_sign)?;
        view_term += l;
        for i in 0..4 {
            grad_q[i] += g[i];
        }
    }
    if weights.mode.uses_regression() {
        let (l, g) = viewpoint_reg_loss(q_pred, q_star);
        view_term += l;
        for i in 0..4 {
            grad_q[i] += g[i];
        }
    }

    let total = weights.lambda_q * view_term + pose_term;
    for i in 0..4 {
        grad_q[i] *= weights.lambda_q;
    }
    Ok(CombinedLoss {
        total,
        pose_term,
        view_term,
        grad_pose,
        grad_q,
    })
}
