//! k-means clustering of viewpoint quaternions.
//!
//! Quaternions are canonicalized (w >= 0) before clustering so one physical
//! viewpoint cannot split across antipodal copies. Distance is chordal
//! (Euclidean in R4), centroids are renormalized to the unit sphere after
//! every mean step, and the whole fit is deterministic given the seed and
//! input order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body_frame::{canonicalize_quaternion, quat_dist, Quat};
use crate::{Error, Result};

/// Which records a cluster model was fitted on: all datasets pooled, or a
/// single dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterScope {
    Global,
    Local(String),
}

impl fmt::Display for ClusterScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterScope::Global => write!(f, "global"),
            ClusterScope::Local(name) => write!(f, "local:{name}"),
        }
    }
}

impl FromStr for ClusterScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "global" {
            Ok(ClusterScope::Global)
        } else if let Some(name) = s.strip_prefix("local:") {
            if name.is_empty() {
                Err(Error::InvalidArgument("empty dataset in local scope".into()))
            } else {
                Ok(ClusterScope::Local(name.to_string()))
            }
        } else {
            Err(Error::InvalidArgument(format!(
                "scope must be \"global\" or \"local:<dataset>\", got {s:?}"
            )))
        }
    }
}

impl Serialize for ClusterScope {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ClusterScope {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fitted k-means model over unit quaternions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    pub scope: ClusterScope,
    /// Final sum of squared assignment distances.
    pub inertia: f64,
    /// Canonicalized unit-quaternion centers, `[w, x, y, z]` each.
    pub centers: Vec<Quat>,
    /// Assignment-step inertia recorded at every Lloyd iteration; not part
    /// of the file format.
    #[serde(skip)]
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let model: ClusterModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        Ok(model)
    }
}

const MAX_ITERATIONS: usize = 300;

fn nearest_center(centers: &[Quat], q: Quat) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = quat_dist(*c, q);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn count_distinct(points: &[Quat]) -> usize {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .find_map(|(x, y)| {
                let ord = x.total_cmp(y);
                (ord != std::cmp::Ordering::Equal).then_some(ord)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    1 + sorted.windows(2).filter(|w| w[0] != w[1]).count()
}

/// k-means++ seeding: first center uniform, the rest sampled proportional
/// to the squared distance to the nearest chosen center.
fn kmeans_pp_init(points: &[Quat], k: usize, rng: &mut ChaCha8Rng) -> Vec<Quat> {
    let mut centers = Vec::with_capacity(k);
    let first = rng.gen_range(0..points.len());
    centers.push(points[first]);

    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| quat_dist(*p, centers[0]).powi(2))
        .collect();

    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let x = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                cum += w;
                if cum > x {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All mass collapsed numerically; take any point distinct from
            // the chosen centers (the distinct-count precondition
            // guarantees one exists).
            points
                .iter()
                .position(|p| centers.iter().all(|c| c != p))
                .unwrap_or(0)
        };
        let center = points[next];
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(quat_dist(*p, center).powi(2));
        }
        centers.push(center);
    }
    centers
}

/// Fits k-means with k-means++ initialization and Lloyd iterations.
///
/// Inputs are canonicalized first. Errors when there are fewer distinct
/// canonicalized quaternions than clusters.
pub fn fit_kmeans(quats: &[Quat], k: usize, seed: u64) -> Result<ClusterModel> {
    fit_kmeans_scoped(quats, k, seed, ClusterScope::Global)
}

fn fit_kmeans_scoped(quats: &[Quat], k: usize, seed: u64, scope: ClusterScope) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let points: Vec<Quat> = quats
        .iter()
        .map(|q| canonicalize_quaternion(*q))
        .collect::<Result<_>>()?;
    let distinct = if points.is_empty() { 0 } else { count_distinct(&points) };
    if distinct < k {
        return Err(Error::TooFewPoints { k, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(&points, k, &mut rng);
    let mut assignments = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();

    for _ in 0..=MAX_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest_center(&centers, *p);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            inertia += d * d;
        }
        trace.push(inertia);
        if !changed || trace.len() > MAX_ITERATIONS {
            break;
        }

        let mut sums = vec![[0.0f64; 4]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            for c in 0..4 {
                sums[a][c] += p[c];
            }
            counts[a] += 1;
        }

        // Re-seed empty clusters with the point farthest from its center,
        // stolen from a cluster that can spare it.
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut victim = None;
            let mut worst = -1.0;
            for (i, p) in points.iter().enumerate() {
                if counts[assignments[i]] <= 1 {
                    continue;
                }
                let d = quat_dist(*p, centers[assignments[i]]);
                if d > worst {
                    worst = d;
                    victim = Some(i);
                }
            }
            if let Some(i) = victim {
                let donor = assignments[i];
                for c in 0..4 {
                    sums[donor][c] -= points[i][c];
                    sums[empty][c] += points[i][c];
                }
                counts[donor] -= 1;
                counts[empty] += 1;
                assignments[i] = empty;
            }
        }

        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mean = sums[c].map(|s| s / counts[c] as f64);
            // The mean of canonical points is canonical; renormalize to the
            // sphere (the optimal unit-norm centroid) and keep the old
            // center if the mean degenerates numerically.
            if let Ok(q) = canonicalize_quaternion(mean) {
                centers[c] = q;
            }
        }
    }

    Ok(ClusterModel {
        k,
        seed,
        scope,
        inertia: trace.last().copied().unwrap_or(0.0),
        centers,
        inertia_trace: trace,
    })
}

/// Index of the nearest center to the canonicalized query; ties break to
/// the lowest index.
pub fn assign(model: &ClusterModel, q: Quat) -> usize {
    let canon = canonicalize_quaternion(q).unwrap_or([1.0, 0.0, 0.0, 0.0]);
    nearest_center(&model.centers, canon).0
}

/// Pools quaternions from per-dataset groups according to `scope`, then
/// fits k-means on the pool.
pub fn fit_scoped(
    groups: &[(String, Vec<Quat>)],
    k: usize,
    seed: u64,
    scope: ClusterScope,
) -> Result<ClusterModel> {
    let pooled: Vec<Quat> = match &scope {
        ClusterScope::Global => groups.iter().flat_map(|(_, qs)| qs.iter().copied()).collect(),
        ClusterScope::Local(name) => groups
            .iter()
            .filter(|(dataset, _)| dataset == name)
            .flat_map(|(_, qs)| qs.iter().copied())
            .collect(),
    };
    if pooled.is_empty() {
        return Err(Error::EmptyScope(scope.to_string()));
    }
    fit_kmeans_scoped(&pooled, k, seed, scope)
}
