//! Synthetic pose-and-viewpoint generator with per-dataset bias profiles.
//!
//! All profiles draw body articulation from one shared pose pool, so the
//! only systematic difference between profiles is viewpoint and camera
//! geometry (azimuth/elevation mixture, camera distance, focal length,
//! skeleton-size target). Generation is deterministic: each record uses an
//! RNG stream derived from `(seed, index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::body_frame::{compute_body_frame, Mat3};
use crate::skeleton::{
    normalize_skeleton, project_to_2d, CameraIntrinsics, Pose, PoseRecord, HEAD, L_ANKLE,
    L_ELBOW, L_HIP, L_KNEE, L_SHOULDER, L_WRIST, NECK, NUM_JOINTS, PELVIS, R_ELBOW, R_HIP,
    R_KNEE, R_SHOULDER, R_WRIST,
};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// One wrapped-normal component of an azimuth mixture, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrappedComponent {
    pub mean_deg: f64,
    pub std_deg: f64,
    pub weight: f64,
}

/// Azimuth distribution: uniform over (-180, 180] or a mixture of wrapped
/// normal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AzimuthDist {
    Uniform,
    Mixture(Vec<WrappedComponent>),
}

/// Elevation distribution over [-90, 90] degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ElevationDist {
    TruncNormal { mean_deg: f64, std_deg: f64 },
    Uniform { lo_deg: f64, hi_deg: f64 },
}

/// Viewpoint and camera bias profile of one synthetic dataset.
///
/// Distance and bone-length statistics are in meters, focal length in
/// pixels. The image size declares the synthetic imaging space used for
/// the containment check; it is sized so that well under 1% of first
/// draws fall outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    pub name: String,
    pub azimuth: AzimuthDist,
    pub elevation: ElevationDist,
    pub distance_m: (f64, f64),
    pub focal_px: (f64, f64),
    pub bone_sum_m: (f64, f64),
    pub image_size: (f64, f64),
}

/// Anatomical angle ranges of the shared pose pool, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosePoolParams {
    pub torso_pitch_deg: (f64, f64),
    pub torso_side_deg: (f64, f64),
    pub torso_twist_deg: (f64, f64),
    pub arm_polar_deg: (f64, f64),
    pub elbow_bend_deg: (f64, f64),
    pub leg_polar_deg: (f64, f64),
    pub knee_bend_deg: (f64, f64),
}

impl Default for PosePoolParams {
    fn default() -> Self {
        PosePoolParams {
            torso_pitch_deg: (-20.0, 45.0),
            torso_side_deg: (-20.0, 20.0),
            torso_twist_deg: (-30.0, 30.0),
            arm_polar_deg: (5.0, 120.0),
            elbow_bend_deg: (0.0, 130.0),
            leg_polar_deg: (0.0, 70.0),
            knee_bend_deg: (0.0, 120.0),
        }
    }
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub profile: BiasProfile,
    pub count: usize,
    pub seed: u64,
    pub pose_pool: PosePoolParams,
}

impl SynthConfig {
    pub fn new(profile: BiasProfile, count: usize, seed: u64) -> Self {
        SynthConfig {
            profile,
            count,
            seed,
            pose_pool: PosePoolParams::default(),
        }
    }
}

/// Ground truth held by the generator for each emitted record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTruth {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_m: f64,
    pub bone_sum_mm: f64,
}

/// Bookkeeping of the resampling loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct GenStats {
    /// Records whose first draw projected outside the image and had to be
    /// redrawn.
    pub resampled_records: usize,
    pub total_attempts: usize,
}

/// Canonical segment lengths, millimeters, before skeleton-size scaling.
mod seg {
    pub const SPINE: f64 = 520.0;
    pub const NECK_HEAD: f64 = 170.0;
    pub const SHOULDER: f64 = 160.0;
    pub const UPPER_ARM: f64 = 280.0;
    pub const FOREARM: f64 = 250.0;
    pub const HIP: f64 = 95.0;
    pub const THIGH: f64 = 420.0;
    pub const SHIN: f64 = 400.0;
}

/// The five built-in bias profiles. Azimuth/elevation shapes follow the
/// qualitative per-dataset descriptions; distance, focal, and bone-length
/// statistics follow the published per-dataset numbers.
pub fn builtin_profiles() -> Vec<BiasProfile> {
    let peak = |mean_deg: f64| WrappedComponent {
        mean_deg,
        std_deg: 12.0,
        weight: 0.25,
    };
    vec![
        BiasProfile {
            name: "h36m-like".into(),
            azimuth: AzimuthDist::Mixture(vec![
                peak(-30.0),
                peak(30.0),
                peak(-160.0),
                peak(160.0),
            ]),
            elevation: ElevationDist::TruncNormal {
                mean_deg: 12.0,
                std_deg: 8.0,
            },
            distance_m: (5.2, 0.8),
            focal_px: (1146.8, 2.0),
            bone_sum_m: (3.9, 0.1),
            image_size: (1200.0, 1200.0),
        },
        BiasProfile {
            name: "gpa-like".into(),
            azimuth: AzimuthDist::Mixture(vec![WrappedComponent {
                mean_deg: 15.0,
                std_deg: 38.0,
                weight: 1.0,
            }]),
            elevation: ElevationDist::TruncNormal {
                mean_deg: 10.0,
                std_deg: 14.0,
            },
            distance_m: (5.1, 1.2),
            focal_px: (1172.4, 121.3),
            bone_sum_m: (3.7, 0.2),
            image_size: (1920.0, 1920.0),
        },
        BiasProfile {
            name: "surreal-like".into(),
            azimuth: AzimuthDist::Uniform,
            elevation: ElevationDist::Uniform {
                lo_deg: -90.0,
                hi_deg: 90.0,
            },
            distance_m: (8.0, 1.0),
            focal_px: (600.0, 0.0),
            bone_sum_m: (3.7, 0.2),
            image_size: (400.0, 400.0),
        },
        BiasProfile {
            name: "3dpw-like".into(),
            azimuth: AzimuthDist::Mixture(vec![WrappedComponent {
                mean_deg: 15.0,
                std_deg: 22.0,
                weight: 1.0,
            }]),
            elevation: ElevationDist::TruncNormal {
                mean_deg: 0.0,
                std_deg: 8.0,
            },
            distance_m: (3.5, 0.7),
            focal_px: (1962.2, 1.5),
            bone_sum_m: (3.7, 0.1),
            image_size: (3200.0, 3200.0),
        },
        BiasProfile {
            name: "3dhp-like".into(),
            azimuth: AzimuthDist::Uniform,
            elevation: ElevationDist::TruncNormal {
                mean_deg: 15.0,
                std_deg: 25.0,
            },
            distance_m: (3.8, 0.8),
            focal_px: (1497.88, 2.8),
            bone_sum_m: (3.7, 0.1),
            image_size: (2600.0, 2600.0),
        },
    ]
}

pub fn profile_by_name(name: &str) -> Result<BiasProfile> {
    let profiles = builtin_profiles();
    let valid: Vec<&str> = profiles.iter().map(|p| p.name.as_str()).collect();
    profiles
        .iter()
        .find(|p| p.name == name)
        .cloned()
        .ok_or_else(|| Error::UnknownProfile(name.to_string(), valid.join(", ")))
}

fn sample_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std <= 0.0 {
        return mean;
    }
    Normal::new(mean, std).expect("finite std").sample(rng)
}

fn wrap_azimuth(az: f64) -> f64 {
    let mut wrapped = (az + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped <= -180.0 {
        wrapped += 360.0;
    }
    wrapped
}

fn sample_azimuth(rng: &mut ChaCha8Rng, dist: &AzimuthDist) -> f64 {
    match dist {
        AzimuthDist::Uniform => {
            let az = rng.gen_range(-180.0..180.0);
            wrap_azimuth(az)
        }
        AzimuthDist::Mixture(components) => {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            let x = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = &components[components.len() - 1];
            for c in components {
                cum += c.weight;
                if cum > x {
                    chosen = c;
                    break;
                }
            }
            wrap_azimuth(sample_normal(rng, chosen.mean_deg, chosen.std_deg))
        }
    }
}

fn sample_elevation(rng: &mut ChaCha8Rng, dist: &ElevationDist) -> f64 {
    match dist {
        ElevationDist::Uniform { lo_deg, hi_deg } => rng.gen_range(*lo_deg..*hi_deg),
        ElevationDist::TruncNormal { mean_deg, std_deg } => {
            for _ in 0..1000 {
                let x = sample_normal(rng, *mean_deg, *std_deg);
                if (-90.0..=90.0).contains(&x) {
                    return x;
                }
            }
            mean_deg.clamp(-90.0, 90.0)
        }
    }
}

fn rotation_about_axis(axis: Vec3, angle_rad: f64) -> Mat3 {
    let a = vec3::normalize(axis).expect("nonzero axis");
    let (s, c) = angle_rad.sin_cos();
    let t = 1.0 - c;
    [
        [
            t * a[0] * a[0] + c,
            t * a[0] * a[1] - s * a[2],
            t * a[0] * a[2] + s * a[1],
        ],
        [
            t * a[0] * a[1] + s * a[2],
            t * a[1] * a[1] + c,
            t * a[1] * a[2] - s * a[0],
        ],
        [
            t * a[0] * a[2] - s * a[1],
            t * a[1] * a[2] + s * a[0],
            t * a[2] * a[2] + c,
        ],
    ]
}

/// Minimal rotation taking unit vector `a` onto unit vector `b`.
fn rotation_between(a: Vec3, b: Vec3) -> Mat3 {
    let c = vec3::dot(a, b);
    let v = vec3::cross(a, b);
    if c < -1.0 + 1e-12 {
        // Antiparallel: a half turn about any axis perpendicular to a.
        let helper = if a[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let p = vec3::normalize(vec3::cross(a, helper)).expect("perpendicular axis");
        return rotation_about_axis(p, std::f64::consts::PI);
    }
    let k = 1.0 / (1.0 + c);
    [
        [
            c + v[0] * v[0] * k,
            -v[2] + v[0] * v[1] * k,
            v[1] + v[0] * v[2] * k,
        ],
        [
            v[2] + v[1] * v[0] * k,
            c + v[1] * v[1] * k,
            -v[0] + v[1] * v[2] * k,
        ],
        [
            -v[1] + v[2] * v[0] * k,
            v[0] + v[2] * v[1] * k,
            c + v[2] * v[2] * k,
        ],
    ]
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    crate::body_frame::mat3_vec(m, v)
}

fn sample_range(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 >= range.1 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

/// Direction at polar angle `theta` from `down`, swung by `phi` around it.
fn spherical_dir(down: Vec3, e1: Vec3, e2: Vec3, theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    vec3::add(
        vec3::scale(ct, down),
        vec3::add(vec3::scale(st * cp, e1), vec3::scale(st * sp, e2)),
    )
}

/// Bends `dir` by `angle` about a random axis perpendicular to it.
fn bend(rng: &mut ChaCha8Rng, dir: Vec3, angle_rad: f64) -> Vec3 {
    let helper = if dir[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let p1 = vec3::normalize(vec3::cross(dir, helper)).expect("perpendicular");
    let p2 = vec3::cross(dir, p1);
    let psi = rng.gen_range(0.0..std::f64::consts::TAU);
    let axis = vec3::add(vec3::scale(psi.cos(), p1), vec3::scale(psi.sin(), p2));
    // axis is perpendicular to dir, so Rodrigues reduces to two terms.
    let (s, c) = angle_rad.sin_cos();
    vec3::add(vec3::scale(c, dir), vec3::scale(s, vec3::cross(axis, dir)))
}

/// Draws one articulated body with the pelvis at the origin, in a frame
/// where an unbent body stands upright facing -z.
fn sample_body(rng: &mut ChaCha8Rng, pool: &PosePoolParams) -> Pose {
    let pitch = sample_range(rng, pool.torso_pitch_deg).to_radians();
    let side = sample_range(rng, pool.torso_side_deg).to_radians();
    let twist = sample_range(rng, pool.torso_twist_deg).to_radians();

    // Torso up direction: -y perturbed by pitch (about x) and side lean
    // (about z).
    let rx = rotation_about_axis([1.0, 0.0, 0.0], pitch);
    let rz = rotation_about_axis([0.0, 0.0, 1.0], side);
    let t_up = vec3::normalize(mat_vec(&rz, mat_vec(&rx, [0.0, -1.0, 0.0]))).unwrap();

    // Shoulder axis: x twisted about the torso, then orthogonalized.
    let twist_rot = rotation_about_axis(t_up, twist);
    let raw_axis = mat_vec(&twist_rot, [1.0, 0.0, 0.0]);
    let s_axis = vec3::normalize(vec3::sub(
        raw_axis,
        vec3::scale(vec3::dot(raw_axis, t_up), t_up),
    ))
    .unwrap();
    let front = vec3::cross(s_axis, t_up);
    let down = vec3::scale(-1.0, t_up);

    let mut joints = [[0.0; 3]; NUM_JOINTS];
    joints[PELVIS] = [0.0; 3];
    joints[NECK] = vec3::scale(seg::SPINE, t_up);
    joints[HEAD] = vec3::add(joints[NECK], vec3::scale(seg::NECK_HEAD, t_up));
    joints[L_SHOULDER] = vec3::add(joints[NECK], vec3::scale(seg::SHOULDER, s_axis));
    joints[R_SHOULDER] = vec3::add(joints[NECK], vec3::scale(-seg::SHOULDER, s_axis));
    joints[L_HIP] = vec3::scale(seg::HIP, s_axis);
    joints[R_HIP] = vec3::scale(-seg::HIP, s_axis);

    let limb = |rng: &mut ChaCha8Rng,
                    origin: Vec3,
                    polar: (f64, f64),
                    bend_range: (f64, f64),
                    upper_len: f64,
                    lower_len: f64| {
        let theta = sample_range(rng, polar).to_radians();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let dir_upper = spherical_dir(down, s_axis, front, theta, phi);
        let mid = vec3::add(origin, vec3::scale(upper_len, dir_upper));
        let bend_angle = sample_range(rng, bend_range).to_radians();
        let dir_lower = bend(rng, dir_upper, bend_angle);
        let end = vec3::add(mid, vec3::scale(lower_len, dir_lower));
        (mid, end)
    };

    let (l_elbow, l_wrist) = limb(
        rng,
        joints[L_SHOULDER],
        pool.arm_polar_deg,
        pool.elbow_bend_deg,
        seg::UPPER_ARM,
        seg::FOREARM,
    );
    joints[L_ELBOW] = l_elbow;
    joints[L_WRIST] = l_wrist;
    let (r_elbow, r_wrist) = limb(
        rng,
        joints[R_SHOULDER],
        pool.arm_polar_deg,
        pool.elbow_bend_deg,
        seg::UPPER_ARM,
        seg::FOREARM,
    );
    joints[R_ELBOW] = r_elbow;
    joints[R_WRIST] = r_wrist;

    let (l_knee, l_ankle) = limb(
        rng,
        joints[L_HIP],
        pool.leg_polar_deg,
        pool.knee_bend_deg,
        seg::THIGH,
        seg::SHIN,
    );
    joints[L_KNEE] = l_knee;
    joints[L_ANKLE] = l_ankle;
    let (r_knee, _) = limb(
        rng,
        joints[R_HIP],
        pool.leg_polar_deg,
        pool.knee_bend_deg,
        seg::THIGH,
        seg::SHIN,
    );
    joints[R_KNEE] = r_knee;

    Pose::new(joints)
}

const MAX_ATTEMPTS: usize = 200;

/// Generates `config.count` records. See [`generate_detailed`] for the
/// variant that also returns the sampled ground truth per record.
pub fn generate(config: &SynthConfig) -> Result<Vec<PoseRecord>> {
    generate_detailed(config).map(|(records, _, _)| records)
}

/// Generates records plus the sampled viewpoint truth and resampling
/// statistics.
pub fn generate_detailed(
    config: &SynthConfig,
) -> Result<(Vec<PoseRecord>, Vec<SampleTruth>, GenStats)> {
    let profile = &config.profile;
    let (width, height) = profile.image_size;
    let intrinsics_template = |focal: f64| CameraIntrinsics {
        fx: focal,
        fy: focal,
        cx: width / 2.0,
        cy: height / 2.0,
    };

    let mut records = Vec::with_capacity(config.count);
    let mut truths = Vec::with_capacity(config.count);
    let mut stats = GenStats::default();

    for index in 0..config.count {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index as u64 + 1);

        let mut emitted = false;
        for attempt in 0..MAX_ATTEMPTS {
            stats.total_attempts += 1;

            let body = sample_body(&mut rng, &config.pose_pool);
            let bone_target_mm = sample_normal(
                &mut rng,
                profile.bone_sum_m.0 * 1000.0,
                profile.bone_sum_m.1 * 1000.0,
            )
            .max(500.0);
            let body = normalize_skeleton(&body, bone_target_mm)
                .expect("constructed body is non-degenerate");

            let azimuth_deg = sample_azimuth(&mut rng, &profile.azimuth);
            let elevation_deg = sample_elevation(&mut rng, &profile.elevation);
            let distance_m = loop {
                let d = sample_normal(&mut rng, profile.distance_m.0, profile.distance_m.1);
                if d > 0.1 {
                    break d;
                }
            };
            let focal = sample_normal(&mut rng, profile.focal_px.0, profile.focal_px.1).max(10.0);
            let k = intrinsics_template(focal);

            // Pelvis lands near the principal point with a small offset.
            let off_u = rng.gen_range(-0.08..0.08) * width / 2.0;
            let off_v = rng.gen_range(-0.08..0.08) * height / 2.0;
            let depth_mm = distance_m * 1000.0;
            let radial = (1.0 + (off_u / k.fx).powi(2) + (off_v / k.fy).powi(2)).sqrt();
            // Scale so the pelvis *norm* equals the sampled distance.
            let z_mm = depth_mm / radial;
            let pelvis_cam = [off_u * z_mm / k.fx, off_v * z_mm / k.fy, z_mm];

            let frame0 = compute_body_frame(&body).expect("torso never degenerate");
            let (s_el, c_el) = elevation_deg.to_radians().sin_cos();
            let (s_az, c_az) = azimuth_deg.to_radians().sin_cos();
            let d_body = [c_el * s_az, s_el, c_el * c_az];
            // Camera direction in construction coordinates.
            let w = vec3::add(
                vec3::scale(d_body[0], frame0.r),
                vec3::add(vec3::scale(d_body[1], frame0.u), vec3::scale(d_body[2], frame0.f)),
            );
            let d_cam = vec3::normalize(vec3::scale(-1.0, pelvis_cam)).expect("nonzero pelvis");
            let q_rot = rotation_between(vec3::normalize(w).expect("unit"), d_cam);

            let mut camera_pose = body;
            for p in &mut camera_pose.joints {
                *p = vec3::add(mat_vec(&q_rot, *p), pelvis_cam);
            }

            if camera_pose.joints.iter().any(|p| p[2] <= 0.0) {
                continue;
            }
            let joints2d = match project_to_2d(&camera_pose, &k) {
                Ok(kp) => kp,
                Err(_) => continue,
            };
            let inside = joints2d
                .iter()
                .all(|&[u, v]| u >= 0.0 && u <= width && v >= 0.0 && v <= height);
            if !inside {
                if attempt == 0 {
                    stats.resampled_records += 1;
                }
                continue;
            }

            records.push(PoseRecord {
                dataset: profile.name.clone(),
                subject: format!("s{:02}", index % 20),
                frame: index as u64,
                intrinsics: k,
                joints3d: camera_pose,
                joints2d: Some(joints2d),
                pelvis_synthesized: false,
            });
            truths.push(SampleTruth {
                azimuth_deg,
                elevation_deg,
                distance_m,
                bone_sum_mm: bone_target_mm,
            });
            emitted = true;
            break;
        }
        if !emitted {
            return Err(Error::InvalidArgument(format!(
                "record {index}: no in-frame sample after {MAX_ATTEMPTS} attempts"
            )));
        }
    }
    Ok((records, truths, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_frame::viewpoint_from_frame;
    use crate::skeleton::bone_length_sum;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn config(name: &str, count: usize, seed: u64) -> SynthConfig {
        SynthConfig::new(profile_by_name(name).unwrap(), count, seed)
    }

    #[test]
    fn unknown_profile_lists_valid_names() {
        let err = profile_by_name("mocap-like").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("h36m-like"));
        assert!(msg.contains("surreal-like"));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = config("gpa-like", 50, 7);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let different_seed = generate(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, different_seed);
    }

    #[test]
    fn generated_viewpoints_round_trip_through_body_frame() {
        for name in ["h36m-like", "surreal-like", "3dpw-like"] {
            let cfg = config(name, 200, 11);
            let (records, truths, _) = generate_detailed(&cfg).unwrap();
            for (record, truth) in records.iter().zip(&truths) {
                let frame = compute_body_frame(&record.joints3d).unwrap();
                let vp =
                    viewpoint_from_frame(&frame, record.joints3d.joints[PELVIS]).unwrap();
                let mut az_err = (vp.azimuth_deg - truth.azimuth_deg).abs();
                az_err = az_err.min(360.0 - az_err);
                assert!(az_err < 1e-6, "azimuth {} vs {}", vp.azimuth_deg, truth.azimuth_deg);
                assert!(
                    (vp.elevation_deg - truth.elevation_deg).abs() < 1e-6,
                    "elevation {} vs {}",
                    vp.elevation_deg,
                    truth.elevation_deg
                );
            }
        }
    }

    #[test]
    fn pelvis_depth_positive_and_distance_matches_truth() {
        let cfg = config("3dhp-like", 200, 13);
        let (records, truths, _) = generate_detailed(&cfg).unwrap();
        for (record, truth) in records.iter().zip(&truths) {
            let pelvis = record.joints3d.joints[PELVIS];
            assert!(pelvis[2] > 0.0);
            let norm_m = vec3::norm(pelvis) / 1000.0;
            assert!((norm_m - truth.distance_m).abs() < 1e-9);
        }
    }

    #[test]
    fn bone_sums_match_sampled_targets() {
        let cfg = config("h36m-like", 100, 17);
        let (records, truths, _) = generate_detailed(&cfg).unwrap();
        for (record, truth) in records.iter().zip(&truths) {
            let sum = bone_length_sum(&record.joints3d);
            assert!((sum - truth.bone_sum_mm).abs() < 1e-6 * truth.bone_sum_mm);
        }
    }

    #[test]
    fn first_draw_containment_is_at_least_99_percent() {
        for name in ["h36m-like", "gpa-like", "surreal-like", "3dpw-like", "3dhp-like"] {
            let cfg = config(name, 2000, 19);
            let (records, _, stats) = generate_detailed(&cfg).unwrap();
            assert_eq!(records.len(), 2000);
            let rate = stats.resampled_records as f64 / 2000.0;
            assert!(rate < 0.01, "{name}: resample rate {rate}");
            for record in &records {
                let (w, h) = cfg.profile.image_size;
                for &[u, v] in record.joints2d.as_ref().unwrap() {
                    assert!(u >= 0.0 && u <= w && v >= 0.0 && v <= h);
                }
            }
        }
    }

    #[test]
    fn surreal_azimuth_is_uniform_by_chi_square() {
        let cfg = config("surreal-like", 50_000, 23);
        let (_, truths, _) = generate_detailed(&cfg).unwrap();
        let mut counts = [0usize; 36];
        for t in &truths {
            let bin = (((t.azimuth_deg + 180.0) / 10.0).floor() as usize).min(35);
            counts[bin] += 1;
        }
        let expected = truths.len() as f64 / 36.0;
        let chi2: f64 = counts
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new(35.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2}, p {p}");
    }

    #[test]
    fn h36m_azimuth_has_four_peaks_near_the_targets() {
        let cfg = config("h36m-like", 50_000, 29);
        let (_, truths, _) = generate_detailed(&cfg).unwrap();
        let mut counts = [0usize; 36];
        for t in &truths {
            let bin = (((t.azimuth_deg + 180.0) / 10.0).floor() as usize).min(35);
            counts[bin] += 1;
        }
        // Circular local maxima with a prominence floor.
        let floor = truths.len() / 200;
        let mut maxima = Vec::new();
        for i in 0..36 {
            let prev = counts[(i + 35) % 36];
            let next = counts[(i + 1) % 36];
            if counts[i] > prev && counts[i] >= next && counts[i] > floor {
                let center = -180.0 + 10.0 * i as f64 + 5.0;
                maxima.push(center);
            }
        }
        assert_eq!(maxima.len(), 4, "maxima at {maxima:?}");
        for target in [-160.0, -30.0, 30.0, 160.0] {
            assert!(
                maxima.iter().any(|m| {
                    let mut d = (m - target).abs();
                    d = d.min(360.0 - d);
                    d <= 10.0
                }),
                "no peak near {target}: {maxima:?}"
            );
        }
    }

    #[test]
    fn h36m_distance_mean_matches_table_value() {
        let cfg = config("h36m-like", 50_000, 31);
        let (_, truths, _) = generate_detailed(&cfg).unwrap();
        let mean: f64 = truths.iter().map(|t| t.distance_m).sum::<f64>() / truths.len() as f64;
        assert!((mean - 5.2).abs() < 0.05, "mean {mean}");
        let var: f64 = truths
            .iter()
            .map(|t| (t.distance_m - mean).powi(2))
            .sum::<f64>()
            / (truths.len() - 1) as f64;
        assert!((var.sqrt() - 0.8).abs() < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn bone_sum_mean_within_sampling_error() {
        let cfg = config("h36m-like", 5_000, 37);
        let (records, _, _) = generate_detailed(&cfg).unwrap();
        let sums: Vec<f64> = records.iter().map(|r| bone_length_sum(&r.joints3d)).collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        // 2 sigma / sqrt(n) band around the profile mean of 3900 mm.
        let band: f64 = 2.0 * 100.0 / (sums.len() as f64).sqrt();
        assert!((mean - 3900.0).abs() < band.max(5.0), "mean {mean}");
    }
}
