//! Closed-form inverse kinematics and the matching forward kinematics.
//!
//! Each rotating joint `j` carries a local rotation `R_j` that swings the
//! T-pose offset of its driving child onto the observed bone direction,
//! expressed in the frame of `j`'s parent. Global rotations compose down the
//! tree: `G_j = G_parent(j) * R_j`, and a child is placed at
//! `P_c = P_j + G_j * (L_c * u_c)`.
//!
//! Sign convention: right-hand rule about the body-fixed T-pose axes
//! (x = subject's left, y = up, z = forward). Swinging the thigh forward is a
//! negative rotation about x, so a seated pose reads hip `theta_x = -90 deg`
//! and knee `theta_x = +90 deg`.

use std::ops::Mul;

use log::warn;
use nalgebra::Matrix3;

use crate::error::{Result, StsError};
use crate::model::{
    JointId, SkeletonFrame, SkeletonSeries, TPoseModel, Vec3, JOINT_COUNT, ROTATING_JOINT_COUNT,
};

/// Squared cross-product norm below which two unit vectors count as
/// (anti)parallel.
const PARALLEL_EPS: f64 = 1e-24;

/// Bone vectors shorter than this are treated as degenerate (meters).
const MIN_BONE: f64 = 1e-9;

/// A proper rotation (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    /// Wraps a matrix without checking; callers guarantee orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        RotationMatrix(m)
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` about a unit `axis` (Rodrigues).
    pub fn axis_angle(axis: &Vec3, angle: f64) -> Self {
        let k = skew(axis);
        let m = Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos());
        RotationMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Inverse, which for a rotation is the transpose.
    pub fn inverse(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// Largest deviation from `R^T R = I`, plus `|det R - 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let e = (self.0.transpose() * self.0 - Matrix3::identity()).abs().max();
        (e, (self.0.determinant() - 1.0).abs())
    }

    pub fn frobenius_distance(&self, other: &RotationMatrix) -> f64 {
        (self.0 - other.0).norm()
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<Vec3> for &RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Skew-symmetric cross-product matrix of `w`.
pub fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Minimal rotation taking the direction of `u` onto the direction of `v`.
///
/// Parallel inputs give the identity. Antiparallel inputs rotate by pi about
/// `normalize(u x e)`, where `e` is the first standard basis vector that is
/// not (nearly) parallel to `u`.
pub fn rotation_between(u: &Vec3, v: &Vec3) -> Result<RotationMatrix> {
    let (nu, nv) = (u.norm(), v.norm());
    if !(nu > 0.0 && nu.is_finite() && nv > 0.0 && nv.is_finite()) {
        return Err(StsError::Degenerate(format!(
            "rotation_between needs nonzero finite vectors (|u| = {nu}, |v| = {nv})"
        )));
    }
    let u = u / nu;
    let v = v / nv;
    let w = u.cross(&v);
    let c = u.dot(&v);
    let w2 = w.norm_squared();
    if w2 < PARALLEL_EPS {
        if c > 0.0 {
            return Ok(RotationMatrix::identity());
        }
        let axis = [Vec3::x(), Vec3::y(), Vec3::z()]
            .iter()
            .map(|e| u.cross(e))
            .find(|a| a.norm_squared() > 0.01)
            .expect("a unit vector is far from at least one basis axis")
            .normalize();
        // pi about a unit axis: 2 a a^T - I
        return Ok(RotationMatrix(
            axis * axis.transpose() * 2.0 - Matrix3::identity(),
        ));
    }
    let k = skew(&w);
    let m = Matrix3::identity() + k + k * k * ((1.0 - c) / w2);
    Ok(RotationMatrix(m))
}

/// Pelvis frame from SpineBase, HipLeft and SpineShoulder via Gram–Schmidt:
/// the lateral axis points at HipLeft, the up axis towards SpineShoulder.
/// Returns the rotation mapping T-pose axes onto that frame.
pub fn root_rotation(frame: &SkeletonFrame) -> Result<RotationMatrix> {
    let base = frame.position(JointId::SpineBase);
    let lateral = frame.position(JointId::HipLeft) - base;
    let up = frame.position(JointId::SpineShoulder) - base;
    let ln = lateral.norm();
    if !(ln > MIN_BONE) {
        return Err(StsError::Degenerate("HipLeft coincides with SpineBase".into()));
    }
    let x = lateral / ln;
    let up_perp = up - x * up.dot(&x);
    let un = up_perp.norm();
    if !(un > MIN_BONE * up.norm().max(1.0)) || !(up.norm() > MIN_BONE) {
        return Err(StsError::Degenerate(
            "SpineBase, HipLeft and SpineShoulder are collinear".into(),
        ));
    }
    let y = up_perp / un;
    let z = x.cross(&y);
    Ok(RotationMatrix(Matrix3::from_columns(&[x, y, z])))
}

/// Bone vector from `child`'s parent to `child`, expressed in the frame
/// described by `frame_rotation` (the global rotation of the parent's parent
/// chain): `R^T (P_child - P_parent)`.
pub fn child_direction(frame: &SkeletonFrame, child: JointId, frame_rotation: &RotationMatrix) -> Vec3 {
    let parent = child
        .parent()
        .expect("child_direction is only defined for non-root joints");
    frame_rotation.0.transpose() * (frame.position(child) - frame.position(parent))
}

/// Euler angles for `R = Rz(z) * Rx(x) * Ry(y)`, radians in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerZxy {
    pub z: f64,
    pub x: f64,
    pub y: f64,
}

impl EulerZxy {
    pub fn new(z: f64, x: f64, y: f64) -> Self {
        Self { z, x, y }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.z, self.x, self.y]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_rotation(self) -> RotationMatrix {
        RotationMatrix::about_z(self.z) * RotationMatrix::about_x(self.x) * RotationMatrix::about_y(self.y)
    }
}

fn wrap_pi(a: f64) -> f64 {
    if a <= -std::f64::consts::PI {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// Decomposes `R` into Z-X-Y Euler angles.
///
/// In gimbal lock (`|theta_x| = 90 deg`) `theta_y` is set to 0 and the free
/// angle is folded into `theta_z`.
pub fn euler_zxy(r: &RotationMatrix) -> EulerZxy {
    let m = &r.0;
    // R = [ . , -sz cx, . ; . , cz cx, . ; -cx sy, sx, cx cy ]
    let cx = m[(0, 1)].hypot(m[(1, 1)]);
    if cx < 1e-12 {
        let x = if m[(2, 1)] > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        let z = m[(1, 0)].atan2(m[(0, 0)]);
        return EulerZxy::new(wrap_pi(z), x, 0.0);
    }
    let z = (-m[(0, 1)]).atan2(m[(1, 1)]);
    // Strip the Z rotation, then read X and Y from M = Rx * Ry exactly.
    let rest = RotationMatrix::about_z(z).0.transpose() * m;
    let x = rest[(2, 1)].atan2(rest[(1, 1)]);
    let y = rest[(0, 2)].atan2(rest[(0, 0)]);
    EulerZxy::new(wrap_pi(z), wrap_pi(x), wrap_pi(y))
}

/// Per-frame local rotations of the 12 rotating joints, shape `[N, 12, 3]`
/// with angles ordered `(theta_z, theta_x, theta_y)` in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRotationSeries {
    pub timestamps: Vec<f64>,
    pub angles: Vec<[[f64; 3]; ROTATING_JOINT_COUNT]>,
    /// `(frame, joint)` pairs whose rotation was carried forward.
    pub degenerate: Vec<(usize, JointId)>,
}

impl JointRotationSeries {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.angles.len(), ROTATING_JOINT_COUNT, 3]
    }

    pub fn get(&self, frame: usize, joint: JointId) -> Option<EulerZxy> {
        let j = joint.rotating_index()?;
        self.angles.get(frame).map(|a| EulerZxy::from_array(a[j]))
    }
}

/// Mean Euclidean distance between each joint and its parent over all frames.
/// The root entry is 0.
pub fn average_bone_lengths(series: &SkeletonSeries) -> Result<[f64; JOINT_COUNT]> {
    if series.is_empty() {
        return Err(StsError::TooShort { needed: 1, got: 0 });
    }
    let mut sums = [0.0; JOINT_COUNT];
    for f in &series.frames {
        for j in JointId::ALL {
            if let Some(p) = j.parent() {
                sums[j.index()] += (f.position(j) - f.position(p)).norm();
            }
        }
    }
    let n = series.len() as f64;
    Ok(sums.map(|s| s / n))
}

/// Solves every frame of `series` against `tpose`.
///
/// Degenerate joints (zero-length bones, collinear pelvis) reuse the previous
/// frame's rotation (identity on the first frame) and are listed in
/// [`JointRotationSeries::degenerate`].
pub fn solve_ik(series: &SkeletonSeries, tpose: &TPoseModel) -> Result<JointRotationSeries> {
    let problems = tpose.check();
    if !problems.is_empty() {
        return Err(StsError::param(format!("invalid T-pose: {}", problems.join("; "))));
    }
    let mut out = JointRotationSeries {
        timestamps: series.timestamps(),
        angles: Vec::with_capacity(series.len()),
        degenerate: Vec::new(),
    };
    let mut previous = [RotationMatrix::identity(); ROTATING_JOINT_COUNT];

    for (fi, frame) in series.frames.iter().enumerate() {
        let mut local = [RotationMatrix::identity(); ROTATING_JOINT_COUNT];
        let mut global = [RotationMatrix::identity(); JOINT_COUNT];
        for (ri, &joint) in JointId::ROTATING.iter().enumerate() {
            let solved = match (joint.parent(), joint.driving_child()) {
                (None, _) => root_rotation(frame).ok(),
                (Some(parent), Some(child)) => {
                    let v = child_direction(frame, child, &global[parent.index()]);
                    if v.norm() > MIN_BONE {
                        rotation_between(&tpose.direction(child), &v).ok()
                    } else {
                        None
                    }
                }
                (Some(_), None) => unreachable!("rotating joints always have a driving child"),
            };
            local[ri] = match solved {
                Some(r) => r,
                None => {
                    warn!("frame {fi}: degenerate {joint}, carrying rotation forward");
                    out.degenerate.push((fi, joint));
                    previous[ri]
                }
            };
            global[joint.index()] = match joint.parent() {
                None => local[ri],
                Some(p) => global[p.index()] * local[ri],
            };
        }
        out.angles
            .push(std::array::from_fn(|ri| euler_zxy(&local[ri]).to_array()));
        previous = local;
    }
    Ok(out)
}

/// Places joints by composing rotations down the tree from the given root
/// positions. Leaves and non-rotating joints inherit their parent's frame.
pub fn forward_kinematics(
    rotations: &JointRotationSeries,
    tpose: &TPoseModel,
    root_positions: &[Vec3],
    rate_hz: f64,
    sensor: crate::model::SensorKind,
) -> Result<SkeletonSeries> {
    if rotations.len() != root_positions.len() || rotations.len() != rotations.timestamps.len() {
        return Err(StsError::DimensionMismatch(format!(
            "{} rotation frames, {} timestamps, {} root positions",
            rotations.len(),
            rotations.timestamps.len(),
            root_positions.len()
        )));
    }
    let frames = rotations
        .angles
        .iter()
        .zip(&rotations.timestamps)
        .zip(root_positions)
        .map(|((angles, &t), root)| {
            let local: [RotationMatrix; ROTATING_JOINT_COUNT] =
                std::array::from_fn(|ri| EulerZxy::from_array(angles[ri]).to_rotation());
            pose_from_local(&local, tpose, *root, t)
        })
        .collect();
    Ok(SkeletonSeries {
        frames,
        rate_hz,
        sensor,
    })
}

/// Forward kinematics for a single frame of local rotation matrices.
pub fn pose_from_local(
    local: &[RotationMatrix; ROTATING_JOINT_COUNT],
    tpose: &TPoseModel,
    root: Vec3,
    timestamp: f64,
) -> SkeletonFrame {
    let mut positions = [Vec3::zeros(); JOINT_COUNT];
    let mut global = [RotationMatrix::identity(); JOINT_COUNT];
    for joint in JointId::ALL {
        match joint.parent() {
            None => {
                positions[joint.index()] = root;
                global[joint.index()] = local[0];
            }
            Some(p) => {
                let gp = global[p.index()];
                positions[joint.index()] = positions[p.index()] + gp * tpose.offset(joint);
                global[joint.index()] = match joint.rotating_index() {
                    Some(ri) => gp * local[ri],
                    None => gp,
                };
            }
        }
    }
    SkeletonFrame {
        timestamp,
        positions,
    }
}
