//! Forward kinematics: from per-joint local rotations/offsets to absolute
//! 3D joint positions.
//!
//! Conventions, used consistently everywhere:
//!
//! * Rotations act on column vectors, `p' = R p`.
//! * A YXZ Euler triple `(α, β, γ)` composes as `R = R_Y(α) · R_X(β) · R_Z(γ)`
//!   (intrinsic order; the recordings store their angle columns as Y, X, Z).
//! * A joint's global transform is `G(j) = G(parent(j)) · L(j)` where `L(j)`
//!   is the joint's local rotation plus translation. The root has no parent;
//!   its translation is already absolute and is passed through verbatim,
//!   while its rotation still propagates to every descendant.
//!
//! All trigonometry is done in radians and double precision.

use alloc::vec::Vec;

use crate::dataset::{JointSample, SkeletonDefinition, SkeletonFrame};
use crate::math;

/// 3×3 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [f64; 9],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.m[row * 3 + col]
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += self.at(r, k) * other.at(k, c);
                }
                out[r * 3 + c] = acc;
            }
        }
        Mat3 { m: out }
    }

    #[inline]
    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        [
            self.m[0] * v[0] + self.m[1] * v[1] + self.m[2] * v[2],
            self.m[3] * v[0] + self.m[4] * v[1] + self.m[5] * v[2],
            self.m[6] * v[0] + self.m[7] * v[1] + self.m[8] * v[2],
        ]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.m;
        Mat3 {
            m: [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]],
        }
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }
}

/// Rigid transform: rotation plus translation. Equivalent to the homogeneous
/// 4×4 matrix with bottom row `[0 0 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rot: Mat3,
    pub trans: [f64; 3],
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rot: Mat3::IDENTITY,
        trans: [0.0, 0.0, 0.0],
    };

    /// `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Transform) -> Transform {
        let rotated = self.rot.mul_vec(other.trans);
        Transform {
            rot: self.rot.mul(&other.rot),
            trans: [
                rotated[0] + self.trans[0],
                rotated[1] + self.trans[1],
                rotated[2] + self.trans[2],
            ],
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rot.mul_vec(p);
        [
            r[0] + self.trans[0],
            r[1] + self.trans[1],
            r[2] + self.trans[2],
        ]
    }
}

/// Absolute joint positions for one frame, in definition order.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    positions: Vec<[f64; 3]>,
}

impl Pose {
    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn joint_count(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KinematicsError {
    /// Frame joint count differs from the skeleton definition.
    SizeMismatch {
        frame: usize,
        joints: usize,
        expected: usize,
    },
}

impl core::fmt::Display for KinematicsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KinematicsError::SizeMismatch {
                frame,
                joints,
                expected,
            } => write!(
                f,
                "frame {frame}: {joints} joints, skeleton defines {expected}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KinematicsError {}

/// Rotation for the YXZ Euler triple `(alpha, beta, gamma)` in radians:
/// `R_Y(alpha) · R_X(beta) · R_Z(gamma)`, expanded in closed form.
pub fn rotation_yxz(alpha: f64, beta: f64, gamma: f64) -> Mat3 {
    let (sa, ca) = (math::sin(alpha), math::cos(alpha));
    let (sb, cb) = (math::sin(beta), math::cos(beta));
    let (sc, cc) = (math::sin(gamma), math::cos(gamma));
    Mat3 {
        m: [
            ca * cc + sa * sb * sc,
            -ca * sc + sa * sb * cc,
            sa * cb,
            cb * sc,
            cb * cc,
            -sb,
            -sa * cc + ca * sb * sc,
            sa * sc + ca * sb * cc,
            ca * cb,
        ],
    }
}

/// Local transform of one joint: its YXZ rotation plus its local offset.
/// `degrees` says whether the stored angles are degrees (converted here) or
/// already radians.
pub fn local_transform(joint: &JointSample, degrees: bool) -> Transform {
    let [y, x, z] = joint.euler;
    let (a, b, c) = if degrees {
        (y.to_radians(), x.to_radians(), z.to_radians())
    } else {
        (y, x, z)
    };
    Transform {
        rot: rotation_yxz(a, b, c),
        trans: joint.local_pos,
    }
}

/// Compose local transforms down the tree and read off each joint's absolute
/// position. The root's position is its stored offset unchanged (identity
/// rotation multiplied in, so the zero-angle case stays exact down the chain).
pub fn forward_kinematics(
    frame: &SkeletonFrame,
    skel: &SkeletonDefinition,
    degrees: bool,
) -> Result<Pose, KinematicsError> {
    forward_kinematics_at(frame, skel, degrees, 0)
}

fn forward_kinematics_at(
    frame: &SkeletonFrame,
    skel: &SkeletonDefinition,
    degrees: bool,
    frame_index: usize,
) -> Result<Pose, KinematicsError> {
    let joints = frame.joints();
    if joints.len() != skel.joint_count() {
        return Err(KinematicsError::SizeMismatch {
            frame: frame_index,
            joints: joints.len(),
            expected: skel.joint_count(),
        });
    }

    let mut global: Vec<Transform> = alloc::vec![Transform::IDENTITY; joints.len()];
    let mut positions: Vec<[f64; 3]> = alloc::vec![[0.0; 3]; joints.len()];
    for &j in skel.topo_order() {
        let local = local_transform(&joints[j], degrees);
        let g = match skel.parent(j) {
            Some(p) => global[p].compose(&local),
            None => local,
        };
        positions[j] = g.trans;
        global[j] = g;
    }
    Ok(Pose { positions })
}

/// Serialize poses to the positions text layout: one frame per line,
/// `3 * J` columns, X Y Z per joint, shortest round-trip float formatting.
pub fn poses_to_text(poses: &[Pose]) -> alloc::string::String {
    use core::fmt::Write;
    let mut out = alloc::string::String::new();
    for pose in poses {
        let mut first = true;
        for p in pose.positions() {
            for v in p {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
        }
        out.push('\n');
    }
    out
}

/// One [`Pose`] per frame, order preserved. Errors carry the frame index.
pub fn convert_sequence(
    sample: &crate::dataset::MovementSample,
    skel: &SkeletonDefinition,
    degrees: bool,
) -> Result<Vec<Pose>, KinematicsError> {
    sample
        .frames()
        .iter()
        .enumerate()
        .map(|(i, frame)| forward_kinematics_at(frame, skel, degrees, i))
        .collect()
}
