use std::fmt::Write as _;

use super::rotation::{add3, mat_mul, mat_vec, Mat3, Quaternion, Vec3, MAT3_IDENTITY};
use super::KinematicsError;
use crate::motion::MotionClip;
use crate::skeleton::{JointKind, Skeleton};

/// One frame: root translation plus one rotation per skeleton joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub root_translation: Vec3,
    pub rotations: Vec<Quaternion>,
}

impl Pose {
    pub fn identity(joints: usize) -> Self {
        Self {
            root_translation: [0.0; 3],
            rotations: vec![Quaternion::IDENTITY; joints],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMode {
    /// Root placed at its translation.
    Global,
    /// Root at the origin.
    RootLocal,
}

/// Per-joint positions, in skeleton length units.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPositions(pub Vec<Vec3>);

impl JointPositions {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shared frame evaluation. `rotation(j)` yields the local rotation matrix of
/// joint `j` if it rotates. Returns positions and global orientations.
pub(crate) fn fk_frame(
    skeleton: &Skeleton,
    rotation: impl Fn(usize) -> Option<Mat3>,
    translation: Vec3,
) -> (Vec<Vec3>, Vec<Mat3>) {
    let n = skeleton.len();
    let mut pos = Vec::with_capacity(n);
    let mut global = Vec::with_capacity(n);
    for (j, joint) in skeleton.joints().iter().enumerate() {
        let (p, g) = match joint.parent {
            None => (translation, rotation(j).unwrap_or(MAT3_IDENTITY)),
            Some(a) => {
                let p = add3(pos[a], mat_vec(&global[a], joint.offset));
                let g = match rotation(j) {
                    Some(r) => mat_mul(&global[a], &r),
                    None => global[a],
                };
                (p, g)
            }
        };
        pos.push(p);
        global.push(g);
    }
    (pos, global)
}

pub fn forward_kinematics(
    skeleton: &Skeleton,
    pose: &Pose,
    mode: RootMode,
) -> Result<JointPositions, KinematicsError> {
    if pose.rotations.len() != skeleton.len() {
        return Err(KinematicsError::LengthMismatch {
            expected: skeleton.len(),
            found: pose.rotations.len(),
        });
    }
    let translation = match mode {
        RootMode::Global => pose.root_translation,
        RootMode::RootLocal => [0.0; 3],
    };
    let (pos, _) = fk_frame(
        skeleton,
        |j| (skeleton.joint(j).kind == JointKind::Actuated).then(|| pose.rotations[j].to_matrix()),
        translation,
    );
    Ok(JointPositions(pos))
}

pub fn motion_fk(
    skeleton: &Skeleton,
    clip: &MotionClip,
    mode: RootMode,
) -> Result<Vec<JointPositions>, KinematicsError> {
    clip.poses
        .iter()
        .map(|p| forward_kinematics(skeleton, p, mode))
        .collect()
}

/// CSV dump with header `frame,joint,x,y,z`.
pub fn write_positions_csv(skeleton: &Skeleton, frames: &[(usize, JointPositions)]) -> String {
    let mut out = String::from("frame,joint,x,y,z\n");
    for (f, positions) in frames {
        for (j, p) in positions.0.iter().enumerate() {
            let _ = writeln!(
                out,
                "{f},{},{},{},{}",
                skeleton.joint(j).name,
                p[0],
                p[1],
                p[2]
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::rotation::{euler_to_quaternion, norm3, sub3, Axis};
    use crate::skeleton::{ChannelKind, Joint};

    fn chain(kinds: &[JointKind], offsets: &[Vec3]) -> Skeleton {
        let joints = kinds
            .iter()
            .zip(offsets)
            .enumerate()
            .map(|(i, (k, o))| Joint {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                offset: *o,
                channels: if *k == JointKind::EndEffector {
                    vec![]
                } else {
                    vec![
                        ChannelKind::Zrotation,
                        ChannelKind::Xrotation,
                        ChannelKind::Yrotation,
                    ]
                },
                kind: *k,
                end_site: false,
            })
            .collect();
        Skeleton::new(joints).unwrap()
    }

    #[test]
    fn identity_pose_sums_offsets() {
        let sk = chain(
            &[
                JointKind::Actuated,
                JointKind::Actuated,
                JointKind::EndEffector,
            ],
            &[[0.0; 3], [1.0, 2.0, 0.0], [0.0, 0.5, 3.0]],
        );
        let p = forward_kinematics(&sk, &Pose::identity(3), RootMode::Global).unwrap();
        assert_eq!(p.0, vec![[0.0; 3], [1.0, 2.0, 0.0], [1.0, 2.5, 3.0]]);
    }

    #[test]
    fn root_quarter_turn_about_z() {
        let l = 2.5;
        let sk = chain(
            &[
                JointKind::Actuated,
                JointKind::Actuated,
                JointKind::EndEffector,
            ],
            &[[0.0; 3], [l, 0.0, 0.0], [0.0; 3]],
        );
        let mut pose = Pose::identity(3);
        pose.rotations[0] = euler_to_quaternion([90.0, 0.0, 0.0], [Axis::Z, Axis::X, Axis::Y]);
        let p = forward_kinematics(&sk, &pose, RootMode::Global).unwrap();
        assert!(p.0[1][0].abs() < 1e-12 && (p.0[1][1] - l).abs() < 1e-12);
    }

    #[test]
    fn fixed_joint_rotation_is_ignored() {
        let sk = chain(
            &[
                JointKind::Fixed,
                JointKind::Fixed,
                JointKind::Actuated,
                JointKind::EndEffector,
            ],
            &[[0.0; 3], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        );
        let mut pose = Pose::identity(4);
        pose.rotations[2] = euler_to_quaternion([10.0, 20.0, 30.0], [Axis::Z, Axis::X, Axis::Y]);
        let base = forward_kinematics(&sk, &pose, RootMode::Global).unwrap();
        pose.rotations[1] = euler_to_quaternion([45.0, -30.0, 60.0], [Axis::Z, Axis::X, Axis::Y]);
        pose.rotations[0] = euler_to_quaternion([5.0, 6.0, 7.0], [Axis::X, Axis::Y, Axis::Z]);
        pose.rotations[3] = euler_to_quaternion([90.0, 0.0, 0.0], [Axis::X, Axis::Y, Axis::Z]);
        assert_eq!(
            forward_kinematics(&sk, &pose, RootMode::Global).unwrap(),
            base
        );
    }

    #[test]
    fn root_local_puts_root_at_origin() {
        let sk = chain(
            &[JointKind::Fixed, JointKind::EndEffector],
            &[[0.0; 3], [0.0, 1.0, 0.0]],
        );
        let mut pose = Pose::identity(2);
        pose.root_translation = [3.0, 4.0, 5.0];
        let g = forward_kinematics(&sk, &pose, RootMode::Global).unwrap();
        let l = forward_kinematics(&sk, &pose, RootMode::RootLocal).unwrap();
        assert_eq!(l.0[0], [0.0; 3]);
        assert_eq!(sub3(g.0[1], g.0[0]), l.0[1]);
        assert!((norm3(l.0[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let sk = chain(
            &[JointKind::Fixed, JointKind::EndEffector],
            &[[0.0; 3], [0.0, 1.0, 0.0]],
        );
        assert_eq!(
            forward_kinematics(&sk, &Pose::identity(3), RootMode::Global),
            Err(KinematicsError::LengthMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn empty_clip_gives_empty_positions() {
        let sk = chain(&[JointKind::Fixed], &[[0.0; 3]]);
        let clip = MotionClip::new("e", 0.02, vec![]);
        assert!(motion_fk(&sk, &clip, RootMode::Global).unwrap().is_empty());
    }

    #[test]
    fn csv_dump_format() {
        let sk = chain(
            &[JointKind::Fixed, JointKind::EndEffector],
            &[[0.0; 3], [0.0, 10.0, 0.0]],
        );
        let p = forward_kinematics(&sk, &Pose::identity(2), RootMode::RootLocal).unwrap();
        assert_eq!(
            write_positions_csv(&sk, &[(0, p)]),
            "frame,joint,x,y,z\n0,j0,0,0,0\n0,j1,0,10,0\n"
        );
    }
}
