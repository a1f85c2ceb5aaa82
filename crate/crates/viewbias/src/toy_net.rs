//! Desk-scale multi-task learner: a feed-forward network mapping
//! normalized 2D keypoints to root-relative 3D pose plus a viewpoint
//! quaternion head, trained with the combined objective. Also houses the
//! dataset-origin probe and the optional canonical-pose branch.
//!
//! Gradients are exact reverse-mode; training is single-threaded and
//! bit-reproducible given the seed.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body_frame::{body_centered, compute_body_frame, Quat};
use crate::heads_losses::{combined_loss, pose_loss, LossWeights};
use crate::metrics::{evaluate_batch, EvalReport, PCK3D_THRESHOLD_MM};
use crate::skeleton::{
    normalize_skeleton, project_to_2d, root_relative, Pose, PoseRecord, NUM_JOINTS,
};
use crate::view_cluster::{assign, ClusterModel};
use crate::{Error, Result};

/// Input width: 14 keypoints x 2 normalized coordinates.
pub const INPUT_DIM: usize = NUM_JOINTS * 2;
/// Pose head width: 14 joints x 3 coordinates.
pub const POSE_DIM: usize = NUM_JOINTS * 3;

/// The pose and canonical heads emit 100 mm units internally; predictions
/// are converted to millimeters on the way out. Keeps head outputs at the
/// same order of magnitude as the normalized inputs, which the
/// scale-free L1 gradient needs to move at a useful pace.
const POSE_OUTPUT_SCALE_MM: f64 = 100.0;

/// Weight of the canonical-pose branch loss when that head is enabled.
const CANONICAL_LOSS_WEIGHT: f64 = 1.0;

const QUAT_NORM_EPS: f64 = 1e-8;

/// Layer sizes and head selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyNetConfig {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub canonical_head: bool,
    pub init_seed: u64,
}

impl Default for ToyNetConfig {
    fn default() -> Self {
        ToyNetConfig {
            input: INPUT_DIM,
            hidden: vec![256, 256],
            canonical_head: false,
            init_seed: 0,
        }
    }
}

/// Dense layer, weights stored as (in, out).
#[derive(Debug, Clone, PartialEq)]
struct Linear {
    w: Array2<f64>,
    b: Array1<f64>,
}

impl Linear {
    fn he(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            std * (-2.0 * u1.ln()).sqrt() * u2.cos()
        });
        Linear {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Multi-task perceptron: shared ReLU trunk, pose head, viewpoint head,
/// optional canonical-pose head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    pub config: ToyNetConfig,
    trunk: Vec<Linear>,
    pose_head: Linear,
    view_head: Linear,
    canonical_head: Option<Linear>,
}

impl ToyNet {
    pub fn new(config: ToyNetConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut trunk = Vec::new();
        let mut width = config.input;
        for &h in &config.hidden {
            trunk.push(Linear::he(&mut rng, width, h));
            width = h;
        }
        let pose_head = Linear::he(&mut rng, width, POSE_DIM);
        let view_head = Linear::he(&mut rng, width, 4);
        let canonical_head = config
            .canonical_head
            .then(|| Linear::he(&mut rng, width, POSE_DIM));
        ToyNet {
            config,
            trunk,
            pose_head,
            view_head,
            canonical_head,
        }
    }

    /// All-zero parameters; used by tests and oracle injection.
    pub fn zeroed(config: ToyNetConfig) -> Self {
        let mut net = ToyNet::new(config);
        let n = net.num_params();
        net.set_params_flat(&vec![0.0; n]).expect("matching size");
        net
    }

    fn layers(&self) -> Vec<&Linear> {
        let mut all: Vec<&Linear> = self.trunk.iter().collect();
        all.push(&self.pose_head);
        all.push(&self.view_head);
        if let Some(c) = &self.canonical_head {
            all.push(c);
        }
        all
    }

    fn layers_mut(&mut self) -> Vec<&mut Linear> {
        let mut all: Vec<&mut Linear> = self.trunk.iter_mut().collect();
        all.push(&mut self.pose_head);
        all.push(&mut self.view_head);
        if let Some(c) = &mut self.canonical_head {
            all.push(c);
        }
        all
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Parameters in a fixed order: trunk layers bottom-up, then pose,
    /// view, and canonical heads; per layer, row-major weights then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in self.layers() {
            flat.extend(layer.w.iter());
            flat.extend(layer.b.iter());
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in self.layers_mut() {
            for w in layer.w.iter_mut() {
                *w = flat[offset];
                offset += 1;
            }
            for b in layer.b.iter_mut() {
                *b = flat[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    /// Flat-parameter offset of the view head block; used by tests that
    /// inspect per-head gradients.
    pub fn view_head_param_range(&self) -> std::ops::Range<usize> {
        let trunk: usize = self.trunk.iter().map(|l| l.param_count()).sum();
        let start = trunk + self.pose_head.param_count();
        start..start + self.view_head.param_count()
    }

    /// Flat-parameter offset of the pose-head bias; used for oracle
    /// injection in tests.
    pub fn pose_head_bias_range(&self) -> std::ops::Range<usize> {
        let trunk: usize = self.trunk.iter().map(|l| l.param_count()).sum();
        let start = trunk + self.pose_head.w.len();
        start..start + self.pose_head.b.len()
    }

    pub fn pose_scale_mm() -> f64 {
        POSE_OUTPUT_SCALE_MM
    }
}

/// Normalization of the raw viewpoint head output: unit length, w >= 0,
/// with an epsilon fallback to the identity quaternion for the zero
/// vector. Returns the quaternion and the data needed for its Jacobian.
fn normalize_view_head(raw: [f64; 4]) -> ([f64; 4], ViewNorm) {
    let n = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n < QUAT_NORM_EPS {
        return (
            [1.0, 0.0, 0.0, 0.0],
            ViewNorm {
                unit: [0.0; 4],
                inv_norm: 0.0,
                flip: 0.0,
            },
        );
    }
    let unit = raw.map(|c| c / n);
    let flip = match unit.iter().find(|c| **c != 0.0) {
        Some(first) if *first < 0.0 => -1.0,
        _ => 1.0,
    };
    (
        unit.map(|c| flip * c),
        ViewNorm {
            unit,
            inv_norm: 1.0 / n,
            flip,
        },
    )
}

#[derive(Debug, Clone, Copy)]
struct ViewNorm {
    unit: [f64; 4],
    inv_norm: f64,
    flip: f64,
}

impl ViewNorm {
    /// Pulls a gradient at the normalized quaternion back to the raw head
    /// output: `flip / n * (I - u u^T) g`.
    fn backprop(&self, g: [f64; 4]) -> [f64; 4] {
        if self.inv_norm == 0.0 {
            return [0.0; 4];
        }
        let dot: f64 = g.iter().zip(&self.unit).map(|(a, b)| a * b).sum();
        std::array::from_fn(|i| self.flip * self.inv_norm * (g[i] - dot * self.unit[i]))
    }
}

/// One prepared training example.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: Vec<f64>,
    /// Root-relative target pose, millimeters.
    pub target_pose: Pose,
    /// Canonical viewpoint quaternion.
    pub q_star: Quat,
    /// Cluster assignment of `q_star`; 0 when no model is in play.
    pub c_star: usize,
    /// Body-centered target for the canonical head.
    pub canonical_pose: Pose,
}

/// Maps a record's 2D keypoints to the network input: pixels to normalized
/// camera coordinates via the intrinsics, then a square crop around the
/// keypoint bounding box mapped to [-1, 1].
pub fn keypoint_features(record: &PoseRecord) -> Result<Vec<f64>> {
    let kp = match &record.joints2d {
        Some(kp) => *kp,
        None => project_to_2d(&record.joints3d, &record.intrinsics)?,
    };
    let k = &record.intrinsics;
    let tangent: Vec<[f64; 2]> = kp
        .iter()
        .map(|&[u, v]| [(u - k.cx) / k.fx, (v - k.cy) / k.fy])
        .collect();
    let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_v, mut max_v) = (f64::INFINITY, f64::NEG_INFINITY);
    for &[u, v] in &tangent {
        min_u = min_u.min(u);
        max_u = max_u.max(u);
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    let center = [(min_u + max_u) / 2.0, (min_v + max_v) / 2.0];
    let half = ((max_u - min_u).max(max_v - min_v) / 2.0).max(1e-9);
    let mut features = Vec::with_capacity(INPUT_DIM);
    for &[u, v] in &tangent {
        features.push((u - center[0]) / half);
        features.push((v - center[1]) / half);
    }
    Ok(features)
}

/// Converts records into training samples. Records whose torso triangle is
/// degenerate (no body frame, hence no viewpoint target) are skipped.
pub fn prepare_samples(
    records: &[PoseRecord],
    model: Option<&ClusterModel>,
) -> Result<Vec<TrainSample>> {
    let mut samples = Vec::with_capacity(records.len());
    for record in records {
        let frame = match compute_body_frame(&record.joints3d) {
            Ok(f) => f,
            Err(Error::DegenerateFrame) => continue,
            Err(e) => return Err(e),
        };
        let features = keypoint_features(record)?;
        let c_star = model.map(|m| assign(m, frame.q)).unwrap_or(0);
        samples.push(TrainSample {
            features,
            target_pose: root_relative(&record.joints3d),
            q_star: frame.q,
            c_star,
            canonical_pose: body_centered(&record.joints3d, &frame),
        });
    }
    Ok(samples)
}

/// Forward pass over a batch, keeping activations for the backward pass.
struct ForwardPass {
    /// Trunk inputs per layer: `activations[0]` is the batch input,
    /// `activations[i+1] = relu(linear_i(activations[i]))`.
    activations: Vec<Array2<f64>>,
    pose_out: Array2<f64>,
    view_q: Vec<Quat>,
    view_norms: Vec<ViewNorm>,
    canonical_out: Option<Array2<f64>>,
}

fn forward_batch(net: &ToyNet, inputs: &Array2<f64>) -> ForwardPass {
    let mut activations = vec![inputs.clone()];
    for layer in &net.trunk {
        let mut a = layer.forward(activations.last().unwrap());
        a.mapv_inplace(|v| v.max(0.0));
        activations.push(a);
    }
    let features = activations.last().unwrap();
    let pose_out = net.pose_head.forward(features);
    let view_raw = net.view_head.forward(features);
    let canonical_out = net.canonical_head.as_ref().map(|h| h.forward(features));

    let mut view_q = Vec::with_capacity(view_raw.nrows());
    let mut view_norms = Vec::with_capacity(view_raw.nrows());
    for row in view_raw.rows() {
        let raw = [row[0], row[1], row[2], row[3]];
        let (q, norm) = normalize_view_head(raw);
        view_q.push(q);
        view_norms.push(norm);
    }
    ForwardPass {
        activations,
        pose_out,
        view_q,
        view_norms,
        canonical_out,
    }
}

fn pose_from_row(row: ndarray::ArrayView1<f64>) -> Pose {
    let mut joints = [[0.0; 3]; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        for c in 0..3 {
            joints[j][c] = row[3 * j + c] * POSE_OUTPUT_SCALE_MM;
        }
    }
    Pose::new(joints)
}

/// Deterministic forward pass for one sample: root-relative pose
/// prediction in millimeters, unit viewpoint quaternion (w >= 0), and the
/// canonical-pose prediction when that head is enabled.
pub fn forward(net: &ToyNet, features: &[f64]) -> Result<(Pose, Quat, Option<Pose>)> {
    if features.len() != net.config.input {
        return Err(Error::ShapeMismatch {
            expected: net.config.input,
            got: features.len(),
        });
    }
    let input = Array2::from_shape_vec((1, features.len()), features.to_vec())
        .expect("shape matches length");
    let pass = forward_batch(net, &input);
    let pose = pose_from_row(pass.pose_out.row(0));
    let canonical = pass.canonical_out.as_ref().map(|c| pose_from_row(c.row(0)));
    Ok((pose, pass.view_q[0], canonical))
}

/// Loss sums over a batch (not yet divided by the batch size).
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchLoss {
    pub total: f64,
    pub pose: f64,
    pub view: f64,
    pub canonical: f64,
}

/// Exact reverse-mode gradients of the summed combined loss over a batch.
/// Returns the loss sums and the gradient in [`ToyNet::params_flat`]
/// order.
pub fn backward(
    net: &ToyNet,
    samples: &[&TrainSample],
    weights: &LossWeights,
    model: Option<&ClusterModel>,
) -> Result<(BatchLoss, Vec<f64>)> {
    let batch = samples.len();
    if batch == 0 {
        return Err(Error::EmptyInput);
    }
    let mut inputs = Array2::zeros((batch, net.config.input));
    for (s, sample) in samples.iter().enumerate() {
        if sample.features.len() != net.config.input {
            return Err(Error::ShapeMismatch {
                expected: net.config.input,
                got: sample.features.len(),
            });
        }
        for (i, v) in sample.features.iter().enumerate() {
            inputs[(s, i)] = *v;
        }
    }

    let pass = forward_batch(net, &inputs);
    let mut loss = BatchLoss::default();
    let mut d_pose = Array2::zeros((batch, POSE_DIM));
    let mut d_view = Array2::zeros((batch, 4));
    let mut d_canonical = pass
        .canonical_out
        .as_ref()
        .map(|_| Array2::zeros((batch, POSE_DIM)));

    for (s, sample) in samples.iter().enumerate() {
        let pred_pose = pose_from_row(pass.pose_out.row(s));
        let out = combined_loss(
            &pred_pose,
            &sample.target_pose,
            pass.view_q[s],
            sample.c_star,
            sample.q_star,
            weights,
            model,
        )?;
        loss.total += out.total;
        loss.pose += out.pose_term;
        loss.view += out.view_term;

        for j in 0..NUM_JOINTS {
            for c in 0..3 {
                d_pose[(s, 3 * j + c)] = out.grad_pose[j][c] * POSE_OUTPUT_SCALE_MM;
            }
        }
        let g_raw = pass.view_norms[s].backprop(out.grad_q);
        for i in 0..4 {
            d_view[(s, i)] = g_raw[i];
        }

        if let (Some(canonical_out), Some(d_canon)) = (&pass.canonical_out, &mut d_canonical) {
            let pred_canonical = pose_from_row(canonical_out.row(s));
            let (canon_loss, canon_grad) = pose_loss(&pred_canonical, &sample.canonical_pose);
            loss.canonical += CANONICAL_LOSS_WEIGHT * canon_loss;
            loss.total += CANONICAL_LOSS_WEIGHT * canon_loss;
            for j in 0..NUM_JOINTS {
                for c in 0..3 {
                    d_canon[(s, 3 * j + c)] =
                        CANONICAL_LOSS_WEIGHT * canon_grad[j][c] * POSE_OUTPUT_SCALE_MM;
                }
            }
        }
    }

    // Head gradients and the feature gradient flowing back into the trunk.
    let features = pass.activations.last().unwrap();
    let mut d_features = d_pose.dot(&net.pose_head.w.t()) + d_view.dot(&net.view_head.w.t());
    let canonical_grads = match (&net.canonical_head, &d_canonical) {
        (Some(head), Some(d_canon)) => {
            d_features = d_features + d_canon.dot(&head.w.t());
            Some((features.t().dot(d_canon), d_canon.sum_axis(Axis(0))))
        }
        _ => None,
    };
    let pose_grads = (features.t().dot(&d_pose), d_pose.sum_axis(Axis(0)));
    let view_grads = (features.t().dot(&d_view), d_view.sum_axis(Axis(0)));

    let mut trunk_grads_rev: Vec<(Array2<f64>, Array1<f64>)> = Vec::new();
    let mut upstream = d_features;
    for (i, layer) in net.trunk.iter().enumerate().rev() {
        let post = &pass.activations[i + 1];
        let masked = &upstream * &post.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        trunk_grads_rev.push((
            pass.activations[i].t().dot(&masked),
            masked.sum_axis(Axis(0)),
        ));
        upstream = masked.dot(&layer.w.t());
    }

    let mut flat = Vec::with_capacity(net.num_params());
    let mut push = |pair: &(Array2<f64>, Array1<f64>)| {
        flat.extend(pair.0.iter());
        flat.extend(pair.1.iter());
    };
    for pair in trunk_grads_rev.iter().rev() {
        push(pair);
    }
    push(&pose_grads);
    push(&view_grads);
    if let Some(pair) = &canonical_grads {
        push(pair);
    }
    Ok((loss, flat))
}

/// Training hyperparameters: adaptive-moment optimizer with a step decay
/// at `floor(0.68 * epochs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_drop_factor: f64,
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 128,
            epochs: 25,
            lr_drop_factor: 0.1,
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Epoch at which the learning rate is multiplied by the drop factor.
    pub fn lr_drop_epoch(&self) -> usize {
        (0.68 * self.epochs as f64).floor() as usize
    }
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub pose: f64,
    pub view: f64,
}

/// Mini-batch training on prepared samples. Deterministic given the seed;
/// errors if the loss becomes non-finite.
pub fn train_samples(
    net: &mut ToyNet,
    samples: &[TrainSample],
    config: &TrainConfig,
    model: Option<&ClusterModel>,
) -> Result<Vec<EpochLoss>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if config.weights.mode.uses_classification() && model.is_none() {
        return Err(Error::MissingClusterModel);
    }

    let n_params = net.num_params();
    let mut params = net.params_flat();
    let mut m = vec![0.0f64; n_params];
    let mut v = vec![0.0f64; n_params];
    let mut step = 0usize;
    let drop_epoch = config.lr_drop_epoch();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = if drop_epoch > 0 && epoch >= drop_epoch {
            config.lr * config.lr_drop_factor
        } else {
            config.lr
        };
        order.shuffle(&mut shuffle_rng);

        let mut sums = BatchLoss::default();
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss, mut grads) = backward(net, &batch, &config.weights, model)?;
            sums.total += loss.total;
            sums.pose += loss.pose;
            sums.view += loss.view;

            let inv_b = 1.0 / batch.len() as f64;
            for g in &mut grads {
                *g *= inv_b;
            }
            step += 1;
            let bias1 = 1.0 - config.beta1.powi(step as i32);
            let bias2 = 1.0 - config.beta2.powi(step as i32);
            for i in 0..n_params {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
                params[i] -= lr * (m[i] / bias1) / ((v[i] / bias2).sqrt() + config.adam_eps);
            }
            net.set_params_flat(&params)?;
        }

        let n = samples.len() as f64;
        let epoch_loss = EpochLoss {
            epoch,
            total: sums.total / n,
            pose: sums.pose / n,
            view: sums.view / n,
        };
        if !epoch_loss.total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curve.push(epoch_loss);
    }
    Ok(curve)
}

/// Prepares samples from records and trains.
pub fn train(
    net: &mut ToyNet,
    records: &[PoseRecord],
    config: &TrainConfig,
    model: Option<&ClusterModel>,
) -> Result<Vec<EpochLoss>> {
    let needs_assignments = config.weights.mode.uses_classification();
    let samples = prepare_samples(records, if needs_assignments { model } else { None })?;
    train_samples(net, &samples, config, model)
}

/// Runs the network over records and scores predictions against ground
/// truth.
pub fn evaluate(net: &ToyNet, records: &[PoseRecord]) -> Result<EvalReport> {
    let samples = prepare_samples(records, None)?;
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut preds = Vec::with_capacity(samples.len());
    let mut gts = Vec::with_capacity(samples.len());
    for sample in &samples {
        let (pose, _, _) = forward(net, &sample.features)?;
        preds.push(pose);
        gts.push(sample.target_pose);
    }
    evaluate_batch(&preds, &gts, PCK3D_THRESHOLD_MM)
}

// ---------------------------------------------------------------------------
// Dataset-origin probe
// ---------------------------------------------------------------------------

/// Pose features for the probe: body-centered + size-normalized when
/// `normalize` is set, raw root-relative otherwise. Values are scaled from
/// millimeters to meters.
fn probe_features(record: &PoseRecord, normalize: bool) -> Result<Option<Vec<f64>>> {
    let pose = if normalize {
        let frame = match compute_body_frame(&record.joints3d) {
            Ok(f) => f,
            Err(Error::DegenerateFrame) => return Ok(None),
            Err(e) => return Err(e),
        };
        let centered = body_centered(&record.joints3d, &frame);
        match normalize_skeleton(&centered, crate::skeleton::DEFAULT_BONE_SUM_MM) {
            Ok(p) => p,
            Err(Error::DegenerateSkeleton) => return Ok(None),
            Err(e) => return Err(e),
        }
    } else {
        root_relative(&record.joints3d)
    };
    Ok(Some(pose.flatten().iter().map(|v| v / 1000.0).collect()))
}

/// Trains a small classifier to predict which profile a pose came from and
/// returns the held-out accuracy (2 x 64 ReLU MLP, 80/20 split).
pub fn dataset_origin_probe(
    records_by_profile: &[(String, Vec<PoseRecord>)],
    normalize: bool,
    seed: u64,
) -> Result<f64> {
    let classes = records_by_profile.len();
    if classes < 2 {
        return Err(Error::InvalidArgument(
            "probe needs at least two profiles".into(),
        ));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (label, (_, records)) in records_by_profile.iter().enumerate() {
        for record in records {
            if let Some(f) = probe_features(record, normalize)? {
                features.push(f);
                labels.push(label);
            }
        }
    }
    if features.len() < classes * 10 {
        return Err(Error::EmptyInput);
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let split = (features.len() * 4) / 5;
    let (train_idx, test_idx) = order.split_at(split);

    let dim = features[0].len();
    let mut layers = vec![
        Linear::he(&mut rng, dim, 64),
        Linear::he(&mut rng, 64, 64),
        Linear::he(&mut rng, 64, classes),
    ];

    let forward_probe = |layers: &[Linear], x: &Array2<f64>| -> (Vec<Array2<f64>>, Array2<f64>) {
        let mut acts = vec![x.clone()];
        for layer in &layers[..layers.len() - 1] {
            let mut a = layer.forward(acts.last().unwrap());
            a.mapv_inplace(|v| v.max(0.0));
            acts.push(a);
        }
        let logits = layers[layers.len() - 1].forward(acts.last().unwrap());
        (acts, logits)
    };

    let n_params: usize = layers.iter().map(|l| l.param_count()).sum();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step = 0usize;
    let (lr, beta1, beta2, eps): (f64, f64, f64, f64) = (1e-3, 0.9, 0.999, 1e-8);
    let epochs = 40;
    let batch_size = 128;

    let mut train_order: Vec<usize> = train_idx.to_vec();
    for _ in 0..epochs {
        train_order.shuffle(&mut rng);
        for chunk in train_order.chunks(batch_size) {
            let b = chunk.len();
            let mut x = Array2::zeros((b, dim));
            for (row, &i) in chunk.iter().enumerate() {
                for (col, val) in features[i].iter().enumerate() {
                    x[(row, col)] = *val;
                }
            }
            let (acts, logits) = forward_probe(&layers, &x);

            // Softmax cross-entropy gradient: p - onehot, averaged.
            let mut d_logits = Array2::zeros((b, classes));
            for (row, &i) in chunk.iter().enumerate() {
                let max = logits
                    .row(row)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.row(row).iter().map(|z| (z - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                for c in 0..classes {
                    let p = exps[c] / total;
                    d_logits[(row, c)] =
                        (p - if labels[i] == c { 1.0 } else { 0.0 }) / b as f64;
                }
            }

            let mut grads_rev: Vec<(Array2<f64>, Array1<f64>)> = Vec::new();
            let mut upstream = d_logits;
            for (i, layer) in layers.iter().enumerate().rev() {
                grads_rev.push((acts[i].t().dot(&upstream), upstream.sum_axis(Axis(0))));
                if i > 0 {
                    upstream = upstream.dot(&layer.w.t())
                        * acts[i].mapv(|val| if val > 0.0 { 1.0 } else { 0.0 });
                }
            }
            grads_rev.reverse();

            step += 1;
            let bias1 = 1.0 - beta1.powi(step as i32);
            let bias2 = 1.0 - beta2.powi(step as i32);
            let mut offset = 0;
            for (layer, (gw, gb)) in layers.iter_mut().zip(&grads_rev) {
                for (w, g) in layer.w.iter_mut().zip(gw.iter()) {
                    m[offset] = beta1 * m[offset] + (1.0 - beta1) * g;
                    v[offset] = beta2 * v[offset] + (1.0 - beta2) * g * g;
                    *w -= lr * (m[offset] / bias1) / ((v[offset] / bias2).sqrt() + eps);
                    offset += 1;
                }
                for (bias, g) in layer.b.iter_mut().zip(gb.iter()) {
                    m[offset] = beta1 * m[offset] + (1.0 - beta1) * g;
                    v[offset] = beta2 * v[offset] + (1.0 - beta2) * g * g;
                    *bias -= lr * (m[offset] / bias1) / ((v[offset] / bias2).sqrt() + eps);
                    offset += 1;
                }
            }
        }
    }

    let mut hits = 0usize;
    for &i in test_idx {
        let x = Array2::from_shape_vec((1, dim), features[i].clone()).expect("shape");
        let (_, logits) = forward_probe(&layers, &x);
        let mut best = 0;
        for c in 1..classes {
            if logits[(0, c)] > logits[(0, best)] {
                best = c;
            }
        }
        if best == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / test_idx.len() as f64)
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

/// Serialized network: layer sizes, flat parameters, and a hash of the
/// training configuration that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub canonical_head: bool,
    pub init_seed: u64,
    pub config_hash: String,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_net(net: &ToyNet, config_hash: String) -> Self {
        Checkpoint {
            input: net.config.input,
            hidden: net.config.hidden.clone(),
            canonical_head: net.config.canonical_head,
            init_seed: net.config.init_seed,
            config_hash,
            params: net.params_flat(),
        }
    }

    pub fn into_net(self) -> Result<ToyNet> {
        let mut net = ToyNet::new(ToyNetConfig {
            input: self.input,
            hidden: self.hidden,
            canonical_head: self.canonical_head,
            init_seed: self.init_seed,
        });
        net.set_params_flat(&self.params)?;
        Ok(net)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
