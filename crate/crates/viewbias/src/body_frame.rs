//! Body-centered coordinate frame construction and quaternion viewpoint
//! geometry.
//!
//! The frame is anchored at the pelvis and oriented by the torso triangle
//! (pelvis, left shoulder, right shoulder): up points from the pelvis to
//! the shoulder midpoint, front along the torso-plane normal, right
//! completes the triple. The rotation between body frame and camera frame
//! is carried as a unit quaternion with the sign convention w >= 0, and
//! the camera direction in body coordinates is reported as
//! azimuth/elevation degrees.

use serde::{Deserialize, Serialize};

use crate::skeleton::{Pose, L_SHOULDER, PELVIS, R_SHOULDER};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Unit quaternion as `[w, x, y, z]`. This component order is used in every
/// JSON output.
pub type Quat = [f64; 4];

/// 3x3 matrix, row-major.
pub type Mat3 = [[f64; 3]; 3];

/// Orthonormal body axes in camera coordinates plus the body-to-camera
/// rotation as a canonical unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFrame {
    pub r: Vec3,
    pub u: Vec3,
    pub f: Vec3,
    pub q: Quat,
}

/// Camera direction relative to the body frame, degrees. Azimuth is 0 when
/// the camera is directly in front of the subject and lies in (-180, 180];
/// elevation is positive when the camera is above the subject's up axis and
/// lies in [-90, 90].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Relative triangle-area threshold below which the torso is degenerate.
const DEGENERACY_TOL: f64 = 1e-6;

pub fn quat_norm(q: Quat) -> f64 {
    q.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn quat_dot(a: Quat, b: Quat) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Euclidean distance in R4; on canonicalized quaternions this is the
/// chordal rotation distance.
pub fn quat_dist(a: Quat, b: Quat) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Normalizes and fixes the antipodal sign: w > 0, or when w = 0 the first
/// nonzero component is positive.
pub fn canonicalize_quaternion(q: Quat) -> Result<Quat> {
    let n = quat_norm(q);
    if n < 1e-12 {
        return Err(Error::ZeroQuaternion);
    }
    // Skip the division when already unit within 1e-12 so that
    // canonicalization is idempotent to the bit.
    let mut out = if (n - 1.0).abs() <= 1e-12 {
        q
    } else {
        q.map(|c| c / n)
    };
    let flip = match out.iter().find(|c| **c != 0.0) {
        Some(first) => *first < 0.0,
        None => return Err(Error::ZeroQuaternion),
    };
    if flip {
        out = out.map(|c| -c);
    }
    Ok(out)
}

/// Assembles the body-to-camera rotation from the unit axes. The stacked
/// matrix `[r u f]` has determinant -1 (because r = f x u), so the rotation
/// is its negation; this fixes the global sign so the upright,
/// camera-facing frame maps to the identity.
fn rotation_from_axes(r: Vec3, u: Vec3, f: Vec3) -> Mat3 {
    [
        [-r[0], -u[0], -f[0]],
        [-r[1], -u[1], -f[1]],
        [-r[2], -u[2], -f[2]],
    ]
}

/// Computes the body-centered frame from a pose. Errors when the torso
/// triangle is degenerate (area below `1e-6` of the squared shoulder span).
pub fn compute_body_frame(pose: &Pose) -> Result<BodyFrame> {
    let p_p = pose.joints[PELVIS];
    let p_l = pose.joints[L_SHOULDER];
    let p_r = pose.joints[R_SHOULDER];

    let u_raw = vec3::sub(vec3::scale(0.5, vec3::add(p_l, p_r)), p_p);
    let f_raw = vec3::cross(vec3::sub(p_l, p_p), vec3::sub(p_r, p_p));

    let span = vec3::sub(p_l, p_r);
    let span_sq = vec3::dot(span, span);
    let area = vec3::norm(f_raw) / 2.0;
    if span_sq < 1e-12 || area < DEGENERACY_TOL * span_sq {
        return Err(Error::DegenerateFrame);
    }

    let f = vec3::normalize(f_raw).ok_or(Error::DegenerateFrame)?;
    // Mocap joints do not give exactly orthogonal axes; project u off f
    // before renormalizing.
    let u_proj = vec3::sub(u_raw, vec3::scale(vec3::dot(u_raw, f), f));
    let u = vec3::normalize(u_proj).ok_or(Error::DegenerateFrame)?;
    let r = vec3::cross(f, u);

    let q = rotation_to_quaternion(&rotation_from_axes(r, u, f))?;
    Ok(BodyFrame { r, u, f, q })
}

fn orthonormality_residual(m: &Mat3) -> f64 {
    let mut max = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut dot = 0.0;
            for k in 0..3 {
                dot += m[i][k] * m[j][k];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            max = max.max((dot - target).abs());
        }
    }
    max
}

pub fn mat3_det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn mat3_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat3_transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Converts a proper rotation matrix to the canonical unit quaternion.
///
/// Selects the numerically largest of the four pivot combinations, so the
/// conversion stays stable near 180-degree rotations where the plain
/// w-pivot formula divides by zero.
pub fn rotation_to_quaternion(m: &Mat3) -> Result<Quat> {
    let residual = orthonormality_residual(m);
    let det = mat3_det(m);
    if residual > 1e-6 || (det - 1.0).abs() > 1e-6 {
        return Err(Error::NotARotation {
            residual: residual.max((det - 1.0).abs()),
        });
    }

    let tr = m[0][0] + m[1][1] + m[2][2];
    let candidates = [
        1.0 + tr,
        1.0 + m[0][0] - m[1][1] - m[2][2],
        1.0 - m[0][0] + m[1][1] - m[2][2],
        1.0 - m[0][0] - m[1][1] + m[2][2],
    ];
    let pivot = candidates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let q = match pivot {
        0 => {
            let s = candidates[0].sqrt() * 2.0;
            [
                s / 4.0,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        }
        1 => {
            let s = candidates[1].sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                s / 4.0,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        }
        2 => {
            let s = candidates[2].sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                s / 4.0,
                (m[1][2] + m[2][1]) / s,
            ]
        }
        _ => {
            let s = candidates[3].sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                s / 4.0,
            ]
        }
    };
    canonicalize_quaternion(q)
}

/// Single-pivot (w) conversion. Singular when `1 + trace` approaches zero
/// (180-degree rotations); kept only as a cross-check against
/// [`rotation_to_quaternion`] in the well-conditioned region.
pub fn single_pivot_quaternion(m: &Mat3) -> Result<Quat> {
    let t = 1.0 + m[0][0] + m[1][1] + m[2][2];
    if t <= 1e-9 {
        return Err(Error::InvalidArgument(
            "single-pivot conversion is singular near 180-degree rotations".into(),
        ));
    }
    let q0 = t.sqrt();
    Ok([
        q0 / 2.0,
        (m[2][1] - m[1][2]) / (2.0 * q0),
        (m[0][2] - m[2][0]) / (2.0 * q0),
        (m[1][0] - m[0][1]) / (2.0 * q0),
    ])
}

/// Standard quaternion-to-matrix expansion; the input is renormalized.
pub fn quaternion_to_rotation(q: Quat) -> Result<Mat3> {
    let n = quat_norm(q);
    if n < 1e-12 {
        return Err(Error::ZeroQuaternion);
    }
    let [w, x, y, z] = q.map(|c| c / n);
    Ok([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ])
}

/// Expresses a pose in its own body frame: root-relative joints rotated by
/// the inverse of the body-to-camera rotation. Chirality is preserved, the
/// upright camera-facing pose is unchanged, and recomputing the frame of
/// the result gives the identity quaternion.
pub fn body_centered(pose: &Pose, frame: &BodyFrame) -> Pose {
    let pelvis = pose.joints[PELVIS];
    let mut out = *pose;
    for p in &mut out.joints {
        let rel = vec3::sub(*p, pelvis);
        // R^T rel, where the columns of R are (-r, -u, -f).
        *p = [
            -vec3::dot(frame.r, rel),
            -vec3::dot(frame.u, rel),
            -vec3::dot(frame.f, rel),
        ];
    }
    out
}

/// Expresses the direction from the pelvis to the camera in body
/// coordinates and converts to azimuth/elevation degrees.
pub fn viewpoint_from_frame(frame: &BodyFrame, pelvis_cam: Vec3) -> Result<Viewpoint> {
    let n = vec3::norm(pelvis_cam);
    if n < 1e-9 {
        return Err(Error::PelvisAtOrigin);
    }
    let v_cam = vec3::scale(-1.0 / n, pelvis_cam);
    let v_r = vec3::dot(frame.r, v_cam);
    let v_u = vec3::dot(frame.u, v_cam);
    let v_f = vec3::dot(frame.f, v_cam);

    // atan2(0, 0) = 0 covers the poles by convention.
    let mut azimuth = v_r.atan2(v_f).to_degrees();
    if azimuth <= -180.0 {
        azimuth += 360.0;
    }
    let elevation = v_u.clamp(-1.0, 1.0).asin().to_degrees();
    Ok(Viewpoint {
        azimuth_deg: azimuth,
        elevation_deg: elevation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::NUM_JOINTS;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_unit_quat(rng: &mut impl Rng) -> Quat {
        loop {
            let q: Quat = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let n = quat_norm(q);
            if n > 1e-3 {
                return q.map(|c| c / n);
            }
        }
    }

    fn upright_pose() -> Pose {
        let mut joints = [[0.0, 0.0, 4000.0]; NUM_JOINTS];
        joints[L_SHOULDER] = [150.0, -500.0, 4000.0];
        joints[R_SHOULDER] = [-150.0, -500.0, 4000.0];
        Pose::new(joints)
    }

    #[test]
    fn upright_facing_camera_is_identity() {
        let frame = compute_body_frame(&upright_pose()).unwrap();
        for c in 0..3 {
            assert!((frame.u[c] - [0.0, -1.0, 0.0][c]).abs() < 1e-12);
            assert!((frame.f[c] - [0.0, 0.0, -1.0][c]).abs() < 1e-12);
            assert!((frame.r[c] - [-1.0, 0.0, 0.0][c]).abs() < 1e-12);
        }
        assert!(quat_dist(frame.q, [1.0, 0.0, 0.0, 0.0]) < 1e-12);
        let vp = viewpoint_from_frame(&frame, [0.0, 0.0, 4000.0]).unwrap();
        assert!(vp.azimuth_deg.abs() < 1e-12);
        assert!(vp.elevation_deg.abs() < 1e-12);
    }

    #[test]
    fn facing_camera_right() {
        let mut joints = [[0.0, 0.0, 4000.0]; NUM_JOINTS];
        joints[L_SHOULDER] = [0.0, -500.0, 4150.0];
        joints[R_SHOULDER] = [0.0, -500.0, 3850.0];
        let frame = compute_body_frame(&Pose::new(joints)).unwrap();
        for c in 0..3 {
            assert!((frame.f[c] - [1.0, 0.0, 0.0][c]).abs() < 1e-12);
            assert!((frame.u[c] - [0.0, -1.0, 0.0][c]).abs() < 1e-12);
            assert!((frame.r[c] - [0.0, 0.0, -1.0][c]).abs() < 1e-12);
        }
        let vp = viewpoint_from_frame(&frame, [0.0, 0.0, 4000.0]).unwrap();
        assert!((vp.azimuth_deg - 90.0).abs() < 1e-9);
        assert!(vp.elevation_deg.abs() < 1e-9);
    }

    #[test]
    fn collinear_torso_is_degenerate() {
        let mut joints = [[0.0, 0.0, 4000.0]; NUM_JOINTS];
        joints[L_SHOULDER] = [0.0, -300.0, 4000.0];
        joints[R_SHOULDER] = [0.0, -600.0, 4000.0];
        assert!(matches!(
            compute_body_frame(&Pose::new(joints)),
            Err(Error::DegenerateFrame)
        ));
    }

    #[test]
    fn pole_viewpoint_uses_zero_azimuth() {
        let frame = compute_body_frame(&upright_pose()).unwrap();
        // Camera along the body's up axis: pelvis direction -u in camera
        // coordinates, i.e. pelvis at (0, 4000, 0) for an upright frame.
        let vp = viewpoint_from_frame(&frame, [0.0, 4000.0, 0.0]).unwrap();
        assert!((vp.elevation_deg - 90.0).abs() < 1e-9);
        assert_eq!(vp.azimuth_deg, 0.0);
    }

    #[test]
    fn rotation_quaternion_examples() {
        let identity: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(rotation_to_quaternion(&identity).unwrap(), [1.0, 0.0, 0.0, 0.0]);

        // 180 degrees about camera z.
        let half_turn: Mat3 = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        let q = rotation_to_quaternion(&half_turn).unwrap();
        assert!(quat_dist(q, [0.0, 0.0, 0.0, 1.0]) < 1e-12);
        assert!(single_pivot_quaternion(&half_turn).is_err());
    }

    #[test]
    fn rejects_non_orthonormal_matrix() {
        let skewed: Mat3 = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            rotation_to_quaternion(&skewed),
            Err(Error::NotARotation { .. })
        ));
        // Reflection: orthonormal but determinant -1.
        let mirror: Mat3 = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(rotation_to_quaternion(&mirror).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(
            canonicalize_quaternion([-1.0, 0.0, 0.0, 0.0]).unwrap(),
            [1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            canonicalize_quaternion([0.0, -1.0, 0.0, 0.0]).unwrap(),
            [0.0, 1.0, 0.0, 0.0]
        );
        assert!(canonicalize_quaternion([0.0; 4]).is_err());
    }

    #[test]
    fn canonicalization_preserves_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let canon = canonicalize_quaternion(q).unwrap();
            let a = quaternion_to_rotation(q).unwrap();
            let b = quaternion_to_rotation(canon).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn round_trip_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = canonicalize_quaternion(random_unit_quat(&mut rng)).unwrap();
            let m = quaternion_to_rotation(q).unwrap();
            let back = rotation_to_quaternion(&m).unwrap();
            let m2 = quaternion_to_rotation(back).unwrap();
            let mut frob = 0.0f64;
            for i in 0..3 {
                for j in 0..3 {
                    frob += (m[i][j] - m2[i][j]).powi(2);
                }
            }
            assert!(frob.sqrt() < 1e-9);
            assert!(quat_dist(q, back) < 1e-9);
        }
    }

    #[test]
    fn single_pivot_matches_stable_when_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 500 {
            let q = random_unit_quat(&mut rng);
            let m = quaternion_to_rotation(q).unwrap();
            let t = 1.0 + m[0][0] + m[1][1] + m[2][2];
            if t <= 0.1 {
                continue;
            }
            let single = canonicalize_quaternion(single_pivot_quaternion(&m).unwrap()).unwrap();
            let stable = rotation_to_quaternion(&m).unwrap();
            assert!(quat_dist(single, stable) < 1e-6);
            checked += 1;
        }
    }

    fn random_pose(rng: &mut impl Rng) -> Pose {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for p in &mut joints {
            *p = [
                rng.gen_range(-800.0..800.0),
                rng.gen_range(-800.0..800.0),
                rng.gen_range(2000.0..6000.0),
            ];
        }
        Pose::new(joints)
    }

    #[test]
    fn body_centered_pose_has_identity_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let frame = match compute_body_frame(&pose) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let centered = body_centered(&pose, &frame);
            let frame2 = compute_body_frame(&centered).unwrap();
            assert!(quat_dist(frame2.q, [1.0, 0.0, 0.0, 0.0]) < 1e-9);
            // Pairwise distances are preserved (proper rotation).
            for a in 0..NUM_JOINTS {
                for b in 0..NUM_JOINTS {
                    let before =
                        vec3::norm(vec3::sub(pose.joints[a], pose.joints[b]));
                    let after =
                        vec3::norm(vec3::sub(centered.joints[a], centered.joints[b]));
                    assert!((before - after).abs() < 1e-9 * before.max(1.0));
                }
            }
        }
    }

    #[test]
    fn body_centered_upright_pose_is_root_relative_identity() {
        let pose = upright_pose();
        let frame = compute_body_frame(&pose).unwrap();
        let centered = body_centered(&pose, &frame);
        let rel = crate::skeleton::root_relative(&pose);
        for j in 0..NUM_JOINTS {
            for c in 0..3 {
                assert!((centered.joints[j][c] - rel.joints[j][c]).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal_and_right_handed(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pose = random_pose(&mut rng);
            let frame = match compute_body_frame(&pose) {
                Ok(f) => f,
                Err(_) => return Ok(()),
            };
            let ortho = vec3::dot(frame.r, frame.u).abs()
                + vec3::dot(frame.u, frame.f).abs()
                + vec3::dot(frame.r, frame.f).abs();
            prop_assert!(ortho < 1e-9);
            for axis in [frame.r, frame.u, frame.f] {
                prop_assert!((vec3::norm(axis) - 1.0).abs() < 1e-9);
            }
            // The assembled body-to-camera rotation is proper.
            let rot = quaternion_to_rotation(frame.q).unwrap();
            prop_assert!((mat3_det(&rot) - 1.0).abs() < 1e-9);
            // Its columns are the negated axes.
            for (c, axis) in [frame.r, frame.u, frame.f].into_iter().enumerate() {
                for i in 0..3 {
                    prop_assert!((rot[i][c] + axis[i]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn frame_is_rotation_equivariant(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let pose = random_pose(&mut rng);
            let frame = match compute_body_frame(&pose) {
                Ok(f) => f,
                Err(_) => return Ok(()),
            };
            let rot = quaternion_to_rotation(random_unit_quat(&mut rng)).unwrap();
            let mut rotated = pose;
            for p in &mut rotated.joints {
                *p = mat3_vec(&rot, *p);
            }
            let rotated_frame = compute_body_frame(&rotated).unwrap();
            for (a, b) in [
                (frame.r, rotated_frame.r),
                (frame.u, rotated_frame.u),
                (frame.f, rotated_frame.f),
            ] {
                let expect = mat3_vec(&rot, a);
                for c in 0..3 {
                    prop_assert!((expect[c] - b[c]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn viewpoint_is_scale_invariant(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 5000);
            let pose = random_pose(&mut rng);
            let frame = match compute_body_frame(&pose) {
                Ok(f) => f,
                Err(_) => return Ok(()),
            };
            let pelvis = pose.joints[PELVIS];
            let vp = viewpoint_from_frame(&frame, pelvis).unwrap();

            // Uniform scaling about the pelvis leaves the frame unchanged.
            let s = rng.gen_range(0.2..5.0);
            let mut scaled = pose;
            for p in &mut scaled.joints {
                *p = vec3::add(pelvis, vec3::scale(s, vec3::sub(*p, pelvis)));
            }
            let scaled_frame = compute_body_frame(&scaled).unwrap();
            let scaled_vp = viewpoint_from_frame(&scaled_frame, pelvis).unwrap();
            prop_assert!((vp.azimuth_deg - scaled_vp.azimuth_deg).abs() < 1e-9);
            prop_assert!((vp.elevation_deg - scaled_vp.elevation_deg).abs() < 1e-9);

            let norm = crate::skeleton::normalize_skeleton(&pose, 3700.0);
            if let Ok(mut normed) = norm {
                // Re-anchor at the original pelvis so the viewpoint ray matches.
                for p in &mut normed.joints {
                    *p = vec3::add(*p, pelvis);
                }
                let f2 = compute_body_frame(&normed).unwrap();
                let vp2 = viewpoint_from_frame(&f2, pelvis).unwrap();
                prop_assert!((vp.azimuth_deg - vp2.azimuth_deg).abs() < 1e-9);
                prop_assert!((vp.elevation_deg - vp2.elevation_deg).abs() < 1e-9);
            }
        }
    }
}
