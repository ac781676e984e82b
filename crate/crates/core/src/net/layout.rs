//! Per-domain feature layout and normalization.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::kinematics::rotation::Quaternion;
use crate::kinematics::{FkLayout, Pose};
use crate::motion::MotionClip;
use crate::skeleton::{JointKind, Rig};

use super::NetError;

/// A block of feature channels owned by one joint (a quaternion) or by the
/// root translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub name: String,
    pub first_channel: usize,
    pub channels: usize,
    pub part: usize,
}

/// Frame features: quaternions `(w, x, y, z)` of the actuated joints in
/// joint order, then root translation. Width `F = 4·A + 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayout {
    pub width: usize,
    /// Joint index of each quaternion block.
    pub actuated: Vec<usize>,
    pub translation_row: usize,
    pub entities: Vec<Entity>,
    pub part_count: usize,
}

impl FeatureLayout {
    pub fn new(rig: &Rig) -> Self {
        let sk = &rig.skeleton;
        let actuated: Vec<usize> = (0..sk.len())
            .filter(|&j| sk.joint(j).kind == JointKind::Actuated)
            .collect();
        let mut entities: Vec<Entity> = actuated
            .iter()
            .enumerate()
            .map(|(a, &j)| Entity {
                name: sk.joint(j).name.clone(),
                first_channel: 4 * a,
                channels: 4,
                part: rig.parts[j],
            })
            .collect();
        let translation_row = 4 * actuated.len();
        entities.push(Entity {
            name: format!("{}.translation", sk.joint(sk.root_index()).name),
            first_channel: translation_row,
            channels: 3,
            part: rig.parts[sk.root_index()],
        });
        Self {
            width: translation_row + 3,
            actuated,
            translation_row,
            entities,
            part_count: rig.part_count,
        }
    }

    pub fn rotation_channels(&self) -> usize {
        self.translation_row
    }

    /// `[F, N]` features of a clip.
    pub fn clip_features(&self, clip: &MotionClip) -> Tensor {
        let n = clip.len();
        let mut data = vec![0.0; self.width * n];
        for (t, pose) in clip.poses.iter().enumerate() {
            for (a, &j) in self.actuated.iter().enumerate() {
                for (k, v) in pose.rotations[j].to_array().iter().enumerate() {
                    data[(4 * a + k) * n + t] = *v;
                }
            }
            for k in 0..3 {
                data[(self.translation_row + k) * n + t] = pose.root_translation[k];
            }
        }
        Tensor::new(vec![self.width, n], data).expect("sized")
    }

    /// Inverse of [`clip_features`](Self::clip_features); joints outside the
    /// layout get identity rotations.
    pub fn features_to_clip(
        &self,
        rig: &Rig,
        features: &Tensor,
        name: &str,
        frame_time: f64,
    ) -> MotionClip {
        let n = features.shape()[1];
        let d = features.data();
        let poses = (0..n)
            .map(|t| {
                let mut pose = Pose::identity(rig.skeleton.len());
                for (a, &j) in self.actuated.iter().enumerate() {
                    let at = |k: usize| d[(4 * a + k) * n + t];
                    pose.rotations[j] = Quaternion::new(at(0), at(1), at(2), at(3));
                }
                for k in 0..3 {
                    pose.root_translation[k] = d[(self.translation_row + k) * n + t];
                }
                pose
            })
            .collect();
        MotionClip::new(name, frame_time, poses)
    }
}

/// Per-channel mean and standard deviation. Root-translation channels are
/// stored in units of character height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const MIN_STD: f64 = 1e-6;

impl NormStats {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }
}

/// Everything the network needs to know about one skeleton domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub rig: Rig,
    pub layout: FeatureLayout,
    pub stats: NormStats,
    pub fk_layout: FkLayout,
}

impl DomainSpec {
    pub fn new(rig: Rig, mut stats: NormStats) -> Result<Self, NetError> {
        let layout = FeatureLayout::new(&rig);
        if stats.mean.len() != layout.width || stats.std.len() != layout.width {
            return Err(NetError::LayoutMismatch {
                expected: layout.width,
                found: stats.mean.len(),
            });
        }
        for s in &mut stats.std {
            *s = s.max(MIN_STD);
        }
        let fk_layout = FkLayout::actuated(&rig.skeleton);
        Ok(Self {
            rig,
            layout,
            stats,
            fk_layout,
        })
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn height(&self) -> f64 {
        self.rig.height()
    }

    /// `(offset, scale)` per channel such that `raw = z·scale + offset`.
    pub fn affine(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.height();
        (0..self.width())
            .map(|c| {
                let unit = if c >= self.layout.translation_row {
                    h
                } else {
                    1.0
                };
                (self.stats.mean[c] * unit, self.stats.std[c] * unit)
            })
            .unzip()
    }

    /// Normalizes a `[F, T]` or `[B, F, T]` raw window.
    pub fn normalize(&self, raw: &Tensor) -> Tensor {
        let (offset, scale) = self.affine();
        map_channels(raw, self.width(), |c, v| (v - offset[c]) / scale[c])
    }

    pub fn denormalize(&self, z: &Tensor) -> Tensor {
        let (offset, scale) = self.affine();
        map_channels(z, self.width(), |c, v| v * scale[c] + offset[c])
    }
}

pub(crate) fn map_channels(x: &Tensor, width: usize, f: impl Fn(usize, f64) -> f64) -> Tensor {
    let t = *x.shape().last().unwrap_or(&1);
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| f((i / t) % width, *v))
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}
