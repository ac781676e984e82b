//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{Matrix4, Quaternion as NaQuat, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retarget_core::kinematics::rotation::Quaternion;
use retarget_core::kinematics::Pose;
use retarget_core::motion::MotionClip;
use retarget_core::skeleton::{ChannelKind, Joint, JointKind, Skeleton};

pub fn corpus_paths() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/bvh");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 {
            return Quaternion::new(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        }
    }
}

fn rotation_channels() -> Vec<ChannelKind> {
    ["Zrotation", "Xrotation", "Yrotation"]
        .iter()
        .map(|c| ChannelKind::parse(c).unwrap())
        .collect()
}

/// A random tree of `n` joints: the root is Fixed or Actuated, leaves are
/// EndEffectors with probability 1/2 and inner joints are Actuated or Fixed.
pub fn random_skeleton(rng: &mut ChaCha8Rng, n: usize) -> Skeleton {
    let mut parents: Vec<Option<usize>> = vec![None];
    for i in 1..n {
        parents.push(Some(if rng.random_bool(0.7) {
            i - 1
        } else {
            rng.random_range(0..i)
        }));
    }
    let has_child: Vec<bool> = (0..n)
        .map(|i| parents.iter().any(|p| *p == Some(i)))
        .collect();
    let joints = (0..n)
        .map(|i| {
            let kind = if i > 0 && !has_child[i] && rng.random_bool(0.5) {
                JointKind::EndEffector
            } else if rng.random_bool(0.65) {
                JointKind::Actuated
            } else {
                JointKind::Fixed
            };
            let mut channels = Vec::new();
            if i == 0 {
                channels.extend(
                    ["Xposition", "Yposition", "Zposition"]
                        .iter()
                        .map(|c| ChannelKind::parse(c).unwrap()),
                );
            }
            if kind != JointKind::EndEffector {
                channels.extend(rotation_channels());
            }
            let offset = if i == 0 {
                [0.0; 3]
            } else {
                std::array::from_fn(|_| rng.random_range(-20.0..20.0))
            };
            Joint {
                name: format!("j{i}"),
                parent: parents[i],
                offset,
                channels,
                kind,
                end_site: kind == JointKind::EndEffector,
            }
        })
        .collect();
    Skeleton::new(joints).unwrap()
}

pub fn random_pose(rng: &mut ChaCha8Rng, joints: usize) -> Pose {
    Pose {
        root_translation: std::array::from_fn(|_| rng.random_range(-100.0..100.0)),
        rotations: (0..joints).map(|_| random_quaternion(rng)).collect(),
    }
}

fn homogeneous(q: Quaternion) -> Matrix4<f64> {
    let [w, x, y, z] = q.to_array();
    UnitQuaternion::from_quaternion(NaQuat::new(w, x, y, z)).to_homogeneous()
}

/// Dense 4x4 transform chain: `M_j = M_parent · T(offset_j) · R_j`, with
/// `R_j` the identity unless the joint is Actuated.
pub fn fk_oracle(skeleton: &Skeleton, pose: &Pose, root_translation: [f64; 3]) -> Vec<[f64; 3]> {
    let mut world: Vec<Matrix4<f64>> = Vec::with_capacity(skeleton.len());
    for (j, joint) in skeleton.joints().iter().enumerate() {
        let rot = if joint.kind == JointKind::Actuated {
            homogeneous(pose.rotations[j])
        } else {
            Matrix4::identity()
        };
        let m = match joint.parent {
            None => Translation3::from(Vector3::from(root_translation)).to_homogeneous() * rot,
            Some(p) => {
                world[p] * Translation3::from(Vector3::from(joint.offset)).to_homogeneous() * rot
            }
        };
        world.push(m);
    }
    world
        .iter()
        .map(|m| [m[(0, 3)], m[(1, 3)], m[(2, 3)]])
        .collect()
}

/// Double loop over frames and non-root joints of root-local oracle positions.
pub fn brute_force_mjpe(skeleton: &Skeleton, a: &MotionClip, b: &MotionClip, unit_mm: f64) -> f64 {
    let root = skeleton.root_index();
    let mut total = 0.0;
    let mut count = 0usize;
    for f in 0..a.len() {
        let pa = fk_oracle(skeleton, &a.poses[f], [0.0; 3]);
        let pb = fk_oracle(skeleton, &b.poses[f], [0.0; 3]);
        for j in 0..skeleton.len() {
            if j == root {
                continue;
            }
            let d: f64 = (0..3).map(|k| (pa[j][k] - pb[j][k]).powi(2)).sum();
            total += d.sqrt();
            count += 1;
        }
    }
    total / count as f64 * unit_mm
}

pub fn random_clip(rng: &mut ChaCha8Rng, skeleton: &Skeleton, frames: usize) -> MotionClip {
    MotionClip::new(
        "random",
        0.02,
        (0..frames)
            .map(|_| random_pose(rng, skeleton.len()))
            .collect(),
    )
}
