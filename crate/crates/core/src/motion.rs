//! Motion clips: per-frame root translation and per-joint rotations.

use crate::bvh::{BvhDocument, FrameTable};
use crate::kinematics::rotation::{euler_to_quaternion, quaternion_to_euler, Quaternion};
use crate::kinematics::Pose;
use crate::skeleton::Skeleton;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub name: String,
    pub frame_time: f64,
    pub poses: Vec<Pose>,
}

impl MotionClip {
    pub fn new(name: impl Into<String>, frame_time: f64, poses: Vec<Pose>) -> Self {
        Self {
            name: name.into(),
            frame_time,
            poses,
        }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Reads root position channels into the root translation (the root
    /// offset is used when the root has none) and rotation channels into
    /// quaternions. Joints without rotation channels get the identity;
    /// position channels on non-root joints are not represented.
    pub fn from_document(name: impl Into<String>, doc: &BvhDocument) -> Self {
        let sk = &doc.skeleton;
        let starts = sk.channel_offsets();
        let root = sk.joint(sk.root_index());
        let poses = (0..doc.frame_count())
            .map(|f| {
                let row = doc.frames.row(f);
                let mut translation = root.offset;
                let mut rotations = Vec::with_capacity(sk.len());
                for (j, joint) in sk.joints().iter().enumerate() {
                    let mut angles = [0.0; 3];
                    let mut k = 0;
                    for (c, ch) in joint.channels.iter().enumerate() {
                        let v = row[starts[j] + c];
                        if let Some(axis) = ch.position_axis() {
                            if j == sk.root_index() {
                                translation[axis.index()] = v;
                            }
                        } else {
                            angles[k] = v;
                            k += 1;
                        }
                    }
                    rotations.push(match joint.rotation_order() {
                        Some(order) => euler_to_quaternion(angles, order),
                        None => Quaternion::IDENTITY,
                    });
                }
                Pose {
                    root_translation: translation,
                    rotations,
                }
            })
            .collect();
        Self::new(name, doc.frame_time, poses)
    }

    /// Writes the clip back as BVH frame values for `skeleton`. Returns the
    /// document and the number of rotations that hit the gimbal-lock branch.
    pub fn to_document(&self, skeleton: &Skeleton) -> (BvhDocument, usize) {
        let starts = skeleton.channel_offsets();
        let columns = skeleton.channel_count();
        let mut data = vec![0.0; columns * self.len()];
        let mut gimbal = 0;
        for (f, pose) in self.poses.iter().enumerate() {
            let row = &mut data[f * columns..(f + 1) * columns];
            for (j, joint) in skeleton.joints().iter().enumerate() {
                let euler = joint.rotation_order().map(|order| {
                    let e = quaternion_to_euler(pose.rotations[j], order);
                    gimbal += e.gimbal as usize;
                    e.angles
                });
                let mut k = 0;
                for (c, ch) in joint.channels.iter().enumerate() {
                    row[starts[j] + c] = match ch.position_axis() {
                        Some(axis) if j == skeleton.root_index() => {
                            pose.root_translation[axis.index()]
                        }
                        Some(axis) => joint.offset[axis.index()],
                        None => {
                            k += 1;
                            euler.map_or(0.0, |e| e[k - 1])
                        }
                    };
                }
            }
        }
        let doc = BvhDocument::new(
            skeleton.clone(),
            FrameTable::new(columns, self.len(), data),
            self.frame_time,
        );
        (doc, gimbal)
    }

    /// Frames `start..start + len` as a new clip.
    pub fn window(&self, start: usize, len: usize) -> MotionClip {
        MotionClip::new(
            self.name.clone(),
            self.frame_time,
            self.poses[start..start + len].to_vec(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::{parse_bvh, write_bvh};

    const TWO_JOINT: &str = "HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT spine
  {
    OFFSET 0 10 0
    CHANNELS 3 Xrotation Yrotation Zrotation
    End Site
    {
      OFFSET 0 10 0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.02
1 2 3 10 20 30 5 -15 25
4 5 6 0 0 0 -40 10 70
";

    #[test]
    fn document_clip_round_trip() {
        let doc = parse_bvh(TWO_JOINT).unwrap();
        let clip = MotionClip::from_document("a", &doc);
        assert_eq!(clip.len(), 2);
        assert_eq!(clip.poses[1].root_translation, [4.0, 5.0, 6.0]);
        let (back, gimbal) = clip.to_document(&doc.skeleton);
        assert_eq!(gimbal, 0);
        assert!(back.max_numeric_difference(&doc).unwrap() < 1e-9);
        let reparsed = parse_bvh(&write_bvh(&back, 6)).unwrap();
        assert!(reparsed.max_numeric_difference(&doc).unwrap() < 1e-6);
    }

    #[test]
    fn window_slices_frames() {
        let clip = MotionClip::from_document("a", &parse_bvh(TWO_JOINT).unwrap());
        let w = clip.window(1, 1);
        assert_eq!(w.len(), 1);
        assert_eq!(w.poses[0], clip.poses[1]);
    }
}
