//! Dataset statistics and distribution reports: per-dataset camera/skeleton
//! statistics, azimuth/elevation histograms, pose-feature export for
//! external embedding tools, and error conditioned on viewpoint.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::body_frame::{body_centered, compute_body_frame, viewpoint_from_frame, Viewpoint};
use crate::skeleton::{
    bone_length_sum, normalize_skeleton, root_relative, PoseRecord, DEFAULT_BONE_SUM_MM, PELVIS,
};
use crate::vec3;
use crate::{Error, Result};

/// Streaming mean/std accumulator (Welford). Reports the sample standard
/// deviation (n - 1); zero for a single observation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count as f64 - 1.0)).sqrt()
        }
    }
}

/// Per-dataset summary statistics: camera distance and bone length in
/// meters, focal length in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    pub distance_m_mean: f64,
    pub distance_m_std: f64,
    pub focal_mean: f64,
    pub focal_std: f64,
    pub bone_m_mean: f64,
    pub bone_m_std: f64,
}

/// Single-pass statistics over one dataset's records.
pub fn compute_stats(records: &[PoseRecord]) -> Result<DatasetStats> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut distance = RunningStats::default();
    let mut focal = RunningStats::default();
    let mut bone = RunningStats::default();
    for record in records {
        distance.push(vec3::norm(record.joints3d.joints[PELVIS]) / 1000.0);
        focal.push(record.intrinsics.fx);
        bone.push(bone_length_sum(&record.joints3d) / 1000.0);
    }
    Ok(DatasetStats {
        count: records.len(),
        distance_m_mean: distance.mean(),
        distance_m_std: distance.std(),
        focal_mean: focal.mean(),
        focal_std: focal.std(),
        bone_m_mean: bone.mean(),
        bone_m_std: bone.std(),
    })
}

/// Groups records by dataset tag, preserving first-appearance order, and
/// computes stats per group.
pub fn compute_stats_by_dataset(records: &[PoseRecord]) -> Result<Vec<(String, DatasetStats)>> {
    let mut groups: Vec<(String, Vec<PoseRecord>)> = Vec::new();
    for record in records {
        match groups.iter_mut().find(|(name, _)| *name == record.dataset) {
            Some((_, list)) => list.push(record.clone()),
            None => groups.push((record.dataset.clone(), vec![record.clone()])),
        }
    }
    groups
        .into_iter()
        .map(|(name, list)| Ok((name, compute_stats(&list)?)))
        .collect()
}

/// Binned azimuth/elevation viewpoint counts. Azimuth bins are half-open
/// `(lo, hi]` over (-180, 180]; elevation bins are `[lo, hi)` over
/// [-90, 90] with the last bin closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewHistogram {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub azimuth_counts: Vec<u64>,
    pub elevation_counts: Vec<u64>,
    /// Joint (azimuth x elevation) grid, row per azimuth bin.
    pub grid: Option<Vec<Vec<u64>>>,
    /// Records whose body frame was degenerate.
    pub skipped: usize,
}

impl ViewHistogram {
    pub fn azimuth_edges(&self, bin: usize) -> (f64, f64) {
        let width = 360.0 / self.azimuth_bins as f64;
        (-180.0 + bin as f64 * width, -180.0 + (bin + 1) as f64 * width)
    }

    pub fn elevation_edges(&self, bin: usize) -> (f64, f64) {
        let width = 180.0 / self.elevation_bins as f64;
        (-90.0 + bin as f64 * width, -90.0 + (bin + 1) as f64 * width)
    }
}

pub fn azimuth_bin(azimuth_deg: f64, bins: usize) -> usize {
    // Half-open (lo, hi] bins: an exact edge value belongs to the bin
    // below it, so +180 lands in the last bin.
    let width = 360.0 / bins as f64;
    let shifted = (azimuth_deg + 180.0) / width;
    let idx = shifted.ceil() as isize - 1;
    idx.clamp(0, bins as isize - 1) as usize
}

pub fn elevation_bin(elevation_deg: f64, bins: usize) -> usize {
    let width = 180.0 / bins as f64;
    let idx = ((elevation_deg + 90.0) / width).floor() as isize;
    idx.clamp(0, bins as isize - 1) as usize
}

/// Computes the viewpoint of every record and accumulates histograms.
/// Frame-degenerate records are counted in `skipped`, not dropped
/// silently.
pub fn view_histogram(
    records: &[PoseRecord],
    azimuth_bins: usize,
    elevation_bins: usize,
    with_grid: bool,
) -> Result<ViewHistogram> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut hist = ViewHistogram {
        azimuth_bins,
        elevation_bins,
        azimuth_counts: vec![0; azimuth_bins],
        elevation_counts: vec![0; elevation_bins],
        grid: with_grid.then(|| vec![vec![0; elevation_bins]; azimuth_bins]),
        skipped: 0,
    };
    for record in records {
        let frame = match compute_body_frame(&record.joints3d) {
            Ok(f) => f,
            Err(Error::DegenerateFrame) => {
                hist.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let vp = viewpoint_from_frame(&frame, record.joints3d.joints[PELVIS])?;
        let a = azimuth_bin(vp.azimuth_deg, azimuth_bins);
        let e = elevation_bin(vp.elevation_deg, elevation_bins);
        hist.azimuth_counts[a] += 1;
        hist.elevation_counts[e] += 1;
        if let Some(grid) = &mut hist.grid {
            grid[a][e] += 1;
        }
    }
    Ok(hist)
}

/// Normalization chain applied before flattening a pose to 42 features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    RootRelative,
    RootRelativeNormalized,
    BodyCentered,
    BodyCenteredNormalized,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 4] = [
        FeatureMode::RootRelative,
        FeatureMode::RootRelativeNormalized,
        FeatureMode::BodyCentered,
        FeatureMode::BodyCenteredNormalized,
    ];
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureMode::RootRelative => "root-relative",
            FeatureMode::RootRelativeNormalized => "root-relative+size-normalized",
            FeatureMode::BodyCentered => "body-centered",
            FeatureMode::BodyCenteredNormalized => "body-centered+size-normalized",
        };
        write!(f, "{s}")
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root-relative" => Ok(FeatureMode::RootRelative),
            "root-relative+size-normalized" => Ok(FeatureMode::RootRelativeNormalized),
            "body-centered" => Ok(FeatureMode::BodyCentered),
            "body-centered+size-normalized" => Ok(FeatureMode::BodyCenteredNormalized),
            _ => Err(Error::UnknownFeatureMode(s.to_string())),
        }
    }
}

/// Applies the feature-mode normalization chain to one record. Returns
/// `None` for records the chain cannot process (degenerate frame or
/// skeleton).
pub fn pose_features(record: &PoseRecord, mode: FeatureMode) -> Result<Option<[f64; 42]>> {
    let pose = match mode {
        FeatureMode::RootRelative => root_relative(&record.joints3d),
        FeatureMode::RootRelativeNormalized => {
            match normalize_skeleton(&record.joints3d, DEFAULT_BONE_SUM_MM) {
                Ok(p) => p,
                Err(Error::DegenerateSkeleton) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        FeatureMode::BodyCentered | FeatureMode::BodyCenteredNormalized => {
            let frame = match compute_body_frame(&record.joints3d) {
                Ok(f) => f,
                Err(Error::DegenerateFrame) => return Ok(None),
                Err(e) => return Err(e),
            };
            let centered = body_centered(&record.joints3d, &frame);
            if mode == FeatureMode::BodyCentered {
                centered
            } else {
                match normalize_skeleton(&centered, DEFAULT_BONE_SUM_MM) {
                    Ok(p) => p,
                    Err(Error::DegenerateSkeleton) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
        }
    };
    Ok(Some(pose.flatten()))
}

/// Writes a CSV feature matrix: one row per processable record, 42 feature
/// columns plus the dataset tag. Returns the number of rows written.
pub fn export_pose_features(
    records: &[PoseRecord],
    mode: FeatureMode,
    path: &Path,
) -> Result<usize> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = Vec::with_capacity(43);
    for name in crate::skeleton::JOINT_NAMES {
        for axis in ["x", "y", "z"] {
            header.push(format!("{name}_{axis}"));
        }
    }
    header.push("dataset".into());
    writer.write_record(&header)?;

    let mut rows = 0;
    for record in records {
        if let Some(features) = pose_features(record, mode)? {
            let mut row: Vec<String> = features.iter().map(|v| format!("{v:.9}")).collect();
            row.push(record.dataset.clone());
            writer.write_record(&row)?;
            rows += 1;
        }
    }
    writer.flush()?;
    Ok(rows)
}

/// Mean error within one viewpoint bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedError {
    pub count: u64,
    pub mean_error_mm: f64,
}

/// Per-azimuth-bin and per-elevation-bin mean errors; bins with no samples
/// are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewErrorProfile {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub azimuth: Vec<Option<BinnedError>>,
    pub elevation: Vec<Option<BinnedError>>,
}

/// Buckets per-sample errors by viewpoint.
pub fn error_by_viewpoint(
    samples: &[(Viewpoint, f64)],
    azimuth_bins: usize,
    elevation_bins: usize,
) -> Result<ViewErrorProfile> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut az_sum = vec![(0u64, 0.0f64); azimuth_bins];
    let mut el_sum = vec![(0u64, 0.0f64); elevation_bins];
    for (vp, err) in samples {
        let a = azimuth_bin(vp.azimuth_deg, azimuth_bins);
        let e = elevation_bin(vp.elevation_deg, elevation_bins);
        az_sum[a].0 += 1;
        az_sum[a].1 += err;
        el_sum[e].0 += 1;
        el_sum[e].1 += err;
    }
    let collapse = |sums: Vec<(u64, f64)>| {
        sums.into_iter()
            .map(|(count, total)| {
                (count > 0).then(|| BinnedError {
                    count,
                    mean_error_mm: total / count as f64,
                })
            })
            .collect()
    };
    Ok(ViewErrorProfile {
        azimuth_bins,
        elevation_bins,
        azimuth: collapse(az_sum),
        elevation: collapse(el_sum),
    })
}

/// Per-azimuth-bin error reduction between a baseline and a treated run:
/// `baseline - treated` where both bins are populated.
pub fn error_reduction(
    baseline: &ViewErrorProfile,
    treated: &ViewErrorProfile,
) -> Result<Vec<Option<f64>>> {
    if baseline.azimuth_bins != treated.azimuth_bins {
        return Err(Error::ShapeMismatch {
            expected: baseline.azimuth_bins,
            got: treated.azimuth_bins,
        });
    }
    Ok(baseline
        .azimuth
        .iter()
        .zip(&treated.azimuth)
        .map(|(b, t)| match (b, t) {
            (Some(b), Some(t)) => Some(b.mean_error_mm - t.mean_error_mm),
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{CameraIntrinsics, Pose, NUM_JOINTS};
    use crate::synth::{generate, profile_by_name, SynthConfig};

    fn record_with_pelvis(pelvis: [f64; 3], fx: f64) -> PoseRecord {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (i, p) in joints.iter_mut().enumerate() {
            *p = [
                pelvis[0] + 20.0 * i as f64,
                pelvis[1] - 30.0 * i as f64,
                pelvis[2] + 10.0 * i as f64,
            ];
        }
        joints[PELVIS] = pelvis;
        PoseRecord {
            dataset: "test".into(),
            subject: "s".into(),
            frame: 0,
            intrinsics: CameraIntrinsics {
                fx,
                fy: fx,
                cx: 500.0,
                cy: 500.0,
            },
            joints3d: Pose::new(joints),
            joints2d: None,
            pelvis_synthesized: false,
        }
    }

    #[test]
    fn stats_single_record() {
        let record = record_with_pelvis([0.0, 0.0, 5200.0], 1146.8);
        let stats = compute_stats(&[record]).unwrap();
        assert_eq!(stats.count, 1);
        assert!((stats.distance_m_mean - 5.2).abs() < 1e-12);
        assert_eq!(stats.distance_m_std, 0.0);
        assert!((stats.focal_mean - 1146.8).abs() < 1e-12);
    }

    #[test]
    fn stats_two_records_use_sample_std() {
        let records = vec![
            record_with_pelvis([0.0, 0.0, 4000.0], 600.0),
            record_with_pelvis([0.0, 0.0, 6000.0], 600.0),
        ];
        let stats = compute_stats(&records).unwrap();
        assert!((stats.distance_m_mean - 5.0).abs() < 1e-12);
        assert!((stats.distance_m_std - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_reject_empty_and_are_permutation_invariant() {
        assert!(compute_stats(&[]).is_err());
        let mut records: Vec<PoseRecord> = (0..20)
            .map(|i| {
                record_with_pelvis([10.0 * i as f64, 0.0, 3000.0 + 100.0 * i as f64], 900.0)
            })
            .collect();
        let forward = compute_stats(&records).unwrap();
        records.reverse();
        let backward = compute_stats(&records).unwrap();
        assert!((forward.distance_m_mean - backward.distance_m_mean).abs() < 1e-12);
        assert!((forward.distance_m_std - backward.distance_m_std).abs() < 1e-9);
    }

    #[test]
    fn synthetic_h36m_stats_recover_profile_values() {
        let cfg = SynthConfig::new(profile_by_name("h36m-like").unwrap(), 20_000, 5);
        let records = generate(&cfg).unwrap();
        let stats = compute_stats(&records).unwrap();
        assert!((stats.distance_m_mean - 5.2).abs() < 0.05, "{}", stats.distance_m_mean);
        assert!((stats.distance_m_std - 0.8).abs() < 0.05, "{}", stats.distance_m_std);
        assert!((stats.bone_m_mean - 3.9).abs() < 0.01, "{}", stats.bone_m_mean);
        assert!((stats.focal_mean - 1146.8).abs() < 0.5, "{}", stats.focal_mean);
    }

    #[test]
    fn histogram_conserves_counts() {
        let cfg = SynthConfig::new(profile_by_name("3dpw-like").unwrap(), 500, 7);
        let records = generate(&cfg).unwrap();
        let hist = view_histogram(&records, 36, 18, true).unwrap();
        let az_total: u64 = hist.azimuth_counts.iter().sum();
        let el_total: u64 = hist.elevation_counts.iter().sum();
        assert_eq!(az_total as usize + hist.skipped, records.len());
        assert_eq!(el_total as usize + hist.skipped, records.len());
        let grid_total: u64 = hist.grid.as_ref().unwrap().iter().flatten().sum();
        assert_eq!(grid_total, az_total);
    }

    #[test]
    fn histogram_of_camera_facing_records_fills_center_bin() {
        let mut joints = [[0.0, 0.0, 4000.0]; NUM_JOINTS];
        joints[crate::skeleton::L_SHOULDER] = [150.0, -500.0, 4000.0];
        joints[crate::skeleton::R_SHOULDER] = [-150.0, -500.0, 4000.0];
        let record = PoseRecord {
            dataset: "x".into(),
            subject: "s".into(),
            frame: 0,
            intrinsics: CameraIntrinsics {
                fx: 1000.0,
                fy: 1000.0,
                cx: 500.0,
                cy: 500.0,
            },
            joints3d: Pose::new(joints),
            joints2d: None,
            pelvis_synthesized: false,
        };
        let records = vec![record; 10];
        let hist = view_histogram(&records, 36, 18, false).unwrap();
        let zero_bin = azimuth_bin(0.0, 36);
        assert_eq!(hist.azimuth_counts[zero_bin], 10);
        assert_eq!(hist.skipped, 0);
    }

    #[test]
    fn uniform_azimuth_bins_are_balanced() {
        let cfg = SynthConfig::new(profile_by_name("surreal-like").unwrap(), 50_000, 11);
        let records = generate(&cfg).unwrap();
        let hist = view_histogram(&records, 36, 18, false).unwrap();
        let max = *hist.azimuth_counts.iter().max().unwrap() as f64;
        let min = *hist.azimuth_counts.iter().min().unwrap() as f64;
        assert!(max / min < 1.3, "ratio {}", max / min);
    }

    #[test]
    fn bin_edge_conventions() {
        assert_eq!(azimuth_bin(180.0, 36), 35);
        assert_eq!(azimuth_bin(-170.0, 36), 0);
        assert_eq!(azimuth_bin(-169.999, 36), 1);
        assert_eq!(elevation_bin(-90.0, 18), 0);
        assert_eq!(elevation_bin(90.0, 18), 17);
        assert_eq!(elevation_bin(0.0, 18), 9);
    }

    #[test]
    fn feature_export_shapes_and_self_consistency() {
        let cfg = SynthConfig::new(profile_by_name("gpa-like").unwrap(), 50, 13);
        let records = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();

        for mode in FeatureMode::ALL {
            let path = dir.path().join(format!("{mode}.csv"));
            let rows = export_pose_features(&records, mode, &path).unwrap();
            assert_eq!(rows, records.len());
            let mut reader = csv::Reader::from_path(&path).unwrap();
            assert_eq!(reader.headers().unwrap().len(), 43);
            for row in reader.records() {
                assert_eq!(row.unwrap().len(), 43);
            }
        }

        for record in &records {
            // Body-centering followed by recomputing the frame gives the
            // identity quaternion.
            let features = pose_features(record, FeatureMode::BodyCentered)
                .unwrap()
                .unwrap();
            let pose = Pose::from_flat(&features).unwrap();
            let frame = compute_body_frame(&pose).unwrap();
            assert!(crate::body_frame::quat_dist(frame.q, [1.0, 0.0, 0.0, 0.0]) < 1e-6);

            // Size-normalized rows hit the bone-sum target.
            let normed = pose_features(record, FeatureMode::BodyCenteredNormalized)
                .unwrap()
                .unwrap();
            let sum = bone_length_sum(&Pose::from_flat(&normed).unwrap());
            assert!((sum - DEFAULT_BONE_SUM_MM).abs() < 1e-6 * DEFAULT_BONE_SUM_MM);
        }
    }

    #[test]
    fn feature_export_is_transform_invariant_when_normalized() {
        let cfg = SynthConfig::new(profile_by_name("h36m-like").unwrap(), 20, 17);
        let records = generate(&cfg).unwrap();
        for record in &records {
            let base = pose_features(record, FeatureMode::BodyCenteredNormalized)
                .unwrap()
                .unwrap();

            // Pre-rotate and pre-scale the input pose about the origin.
            let rot = crate::body_frame::quaternion_to_rotation(
                crate::body_frame::canonicalize_quaternion([0.8, 0.3, -0.4, 0.2]).unwrap(),
            )
            .unwrap();
            let mut warped = record.clone();
            let mut warped_pose = warped.joints3d;
            for p in &mut warped_pose.joints {
                *p = vec3::scale(1.7, crate::body_frame::mat3_vec(&rot, *p));
            }
            warped.joints3d = warped_pose;
            let warped_features = pose_features(&warped, FeatureMode::BodyCenteredNormalized)
                .unwrap()
                .unwrap();
            for (a, b) in base.iter().zip(&warped_features) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn error_by_viewpoint_buckets_and_reduction() {
        let vp = |az: f64| Viewpoint {
            azimuth_deg: az,
            elevation_deg: 0.0,
        };
        // Errors proportional to |azimuth|: bin means grow outward.
        let samples: Vec<(Viewpoint, f64)> = (-17..=17)
            .map(|i| {
                let az = 10.0 * i as f64;
                (vp(az), az.abs())
            })
            .collect();
        let profile = error_by_viewpoint(&samples, 36, 18).unwrap();
        let center = azimuth_bin(0.0, 36);
        let center_err = profile.azimuth[center].as_ref().unwrap().mean_error_mm;
        let edge_err = profile.azimuth[0].as_ref().unwrap().mean_error_mm;
        assert!(center_err < edge_err);

        // Identical errors in every bin give equal means.
        let flat: Vec<(Viewpoint, f64)> =
            (-17..=17).map(|i| (vp(10.0 * i as f64), 42.0)).collect();
        let flat_profile = error_by_viewpoint(&flat, 36, 18).unwrap();
        for bin in flat_profile.azimuth.iter().flatten() {
            assert!((bin.mean_error_mm - 42.0).abs() < 1e-12);
        }

        // Reduction reconciles with the aggregate difference.
        let reduction = error_reduction(&profile, &flat_profile).unwrap();
        let mut total_reduction = 0.0;
        let mut total_count = 0u64;
        for (bin, red) in profile.azimuth.iter().zip(&reduction) {
            if let (Some(b), Some(r)) = (bin, red) {
                total_reduction += r * b.count as f64;
                total_count += b.count;
            }
        }
        let agg_baseline: f64 = samples.iter().map(|(_, e)| e).sum::<f64>() / 35.0;
        let agg_treated = 42.0;
        assert!(
            (total_reduction / total_count as f64 - (agg_baseline - agg_treated)).abs() < 1e-9
        );

        // Empty bins stay absent.
        let sparse = error_by_viewpoint(&[(vp(5.0), 1.0)], 36, 18).unwrap();
        assert_eq!(sparse.azimuth.iter().flatten().count(), 1);
    }
}
