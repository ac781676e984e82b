use std::collections::BTreeMap;

use crate::autodiff::Tensor;
use crate::kinematics::rotation::{norm3, sub3};
use crate::kinematics::{motion_fk, JointPositions, RootMode};
use crate::motion::MotionClip;
use crate::net::{Domain, RetargetModel};
use crate::skeleton::{EndEffectors, Skeleton};

use super::report::{Aggregate, EeErrors, MetricsReport, MotionMetrics};
use super::EvalError;

/// `(key, joint in a, joint in b)` triples, keys from [`EndEffectors::KEYS`].
pub type EndEffectorMap = Vec<(String, String, String)>;

fn root_local(skeleton: &Skeleton, clip: &MotionClip) -> Result<Vec<JointPositions>, EvalError> {
    if let Some(p) = clip
        .poses
        .iter()
        .find(|p| p.rotations.len() != skeleton.len())
    {
        return Err(EvalError::SkeletonMismatch(format!(
            "clip {} has {} joints, skeleton {}",
            clip.name,
            p.rotations.len(),
            skeleton.len()
        )));
    }
    Ok(motion_fk(skeleton, clip, RootMode::RootLocal)?)
}

/// Mean Euclidean distance over frames and joints other than `exclude`.
pub fn positions_error(
    a: &[JointPositions],
    b: &[JointPositions],
    exclude: Option<usize>,
) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::FrameCountMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pa, pb) in a.iter().zip(b) {
        if pa.0.len() != pb.0.len() {
            return Err(EvalError::SkeletonMismatch(format!(
                "{} vs {} joints",
                pa.0.len(),
                pb.0.len()
            )));
        }
        for (j, (x, y)) in pa.0.iter().zip(&pb.0).enumerate() {
            if Some(j) != exclude {
                sum += norm3(sub3(*x, *y));
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Root-local mean joint position error excluding the root, in mm.
pub fn mean_joint_position_error(
    skeleton: &Skeleton,
    a: &MotionClip,
    b: &MotionClip,
    unit_scale_mm: f64,
) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::FrameCountMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let pa = root_local(skeleton, a)?;
    let pb = root_local(skeleton, b)?;
    Ok(positions_error(&pa, &pb, Some(skeleton.root_index()))? * unit_scale_mm)
}

/// Mean root-local distance per mapped end-effector pair, in cm.
pub fn end_effector_errors(
    skeleton_a: &Skeleton,
    a: &MotionClip,
    skeleton_b: &Skeleton,
    b: &MotionClip,
    map: &EndEffectorMap,
    unit_scale_cm: f64,
) -> Result<BTreeMap<String, f64>, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::FrameCountMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let pa = root_local(skeleton_a, a)?;
    let pb = root_local(skeleton_b, b)?;
    let mut out = BTreeMap::new();
    for (key, ja, jb) in map {
        let ia = skeleton_a
            .find(ja)
            .ok_or_else(|| EvalError::UnknownEndEffector(ja.clone()))?;
        let ib = skeleton_b
            .find(jb)
            .ok_or_else(|| EvalError::UnknownEndEffector(jb.clone()))?;
        let total: f64 = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| norm3(sub3(x.0[ia], y.0[ib])))
            .sum();
        let mean = if pa.is_empty() {
            0.0
        } else {
            total / pa.len() as f64
        };
        out.insert(key.clone(), mean * unit_scale_cm);
    }
    Ok(out)
}

/// Pairs the three tracked end-effectors of two configs.
pub fn ee_map(a: &EndEffectors, b: &EndEffectors) -> EndEffectorMap {
    EndEffectors::KEYS
        .iter()
        .zip(a.names().iter().zip(b.names()))
        .map(|(k, (x, y))| (k.to_string(), x.to_string(), y.to_string()))
        .collect()
}

/// Nearest-frame resampling to `frames` frames.
pub fn resample_nearest(clip: &MotionClip, frames: usize) -> MotionClip {
    let n = clip.len();
    if n == frames || n == 0 {
        return clip.clone();
    }
    let poses = (0..frames)
        .map(|i| {
            let src = if frames == 1 {
                0
            } else {
                ((i * (n - 1)) as f64 / (frames - 1) as f64).round() as usize
            };
            clip.poses[src.min(n - 1)].clone()
        })
        .collect();
    MotionClip::new(
        clip.name.clone(),
        clip.frame_time * n as f64 / frames as f64,
        poses,
    )
}

/// Non-overlapping window starts, plus an end-aligned final window when
/// `n` is not a multiple of `t`. Empty when `n < t`.
pub fn tiling_starts(n: usize, t: usize) -> Vec<usize> {
    if n < t || t == 0 {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..n / t).map(|k| k * t).collect();
    if n % t != 0 {
        starts.push(n - t);
    }
    starts
}

/// Applies `f` to a whole clip by tiling windows of length `t`; frames in
/// overlapping windows come from the later one.
fn tile_map(
    model: &RetargetModel,
    from: Domain,
    to: Domain,
    clip: &MotionClip,
    t: usize,
    f: impl Fn(&Tensor) -> Result<Tensor, crate::net::NetError>,
) -> Result<MotionClip, EvalError> {
    let (src_dom, dst_dom) = (model.domain(from), model.domain(to));
    let n = clip.len();
    let starts = tiling_starts(n, t);
    if starts.is_empty() {
        return Err(EvalError::ClipTooShort {
            name: clip.name.clone(),
            frames: n,
            window: t,
        });
    }
    if clip
        .poses
        .iter()
        .any(|p| p.rotations.len() != src_dom.rig.skeleton.len())
    {
        return Err(EvalError::SkeletonMismatch(format!(
            "clip {} does not fit the source skeleton",
            clip.name
        )));
    }
    let (fi, fo) = (src_dom.width(), dst_dom.width());
    let feats = src_dom.layout.clip_features(clip);
    let src = feats.data();
    let mut batch = Vec::with_capacity(starts.len() * fi * t);
    for &s in &starts {
        for c in 0..fi {
            batch.extend_from_slice(&src[c * n + s..c * n + s + t]);
        }
    }
    let out = f(&Tensor::new(vec![starts.len(), fi, t], batch).expect("sized"))?;
    let mut assembled = vec![0.0; fo * n];
    for (w, &s) in starts.iter().enumerate() {
        for c in 0..fo {
            let from = &out.data()[(w * fo + c) * t..(w * fo + c + 1) * t];
            assembled[c * n + s..c * n + s + t].copy_from_slice(from);
        }
    }
    let assembled = Tensor::new(vec![fo, n], assembled).expect("sized");
    Ok(dst_dom
        .layout
        .features_to_clip(&dst_dom.rig, &assembled, &clip.name, clip.frame_time))
}

/// Retargets a whole clip from one domain to the other.
pub fn retarget_clip(
    model: &RetargetModel,
    from: Domain,
    clip: &MotionClip,
    t: usize,
) -> Result<MotionClip, EvalError> {
    tile_map(model, from, from.other(), clip, t, |x| {
        model.retarget_window(from, from.other(), x)
    })
}

/// Home → other → home reconstruction of a whole clip.
pub fn cycle_reconstruct(
    model: &RetargetModel,
    home: Domain,
    clip: &MotionClip,
    t: usize,
) -> Result<MotionClip, EvalError> {
    tile_map(model, home, home, clip, t, |x| model.cycle_window(home, x))
}

/// Cycle reconstruction error of every clip of `home`.
pub fn cycle_evaluate(
    model: &RetargetModel,
    home: Domain,
    clips: &[MotionClip],
    t: usize,
    unit_scale_mm: f64,
) -> Result<MetricsReport, EvalError> {
    let rig = &model.domain(home).rig;
    let map = ee_map(&rig.config.end_effectors, &rig.config.end_effectors);
    let mut per_motion = Vec::with_capacity(clips.len());
    for clip in clips {
        let recon = cycle_reconstruct(model, home, clip, t)?;
        let mjpe = mean_joint_position_error(&rig.skeleton, clip, &recon, unit_scale_mm)?;
        let ee = end_effector_errors(
            &rig.skeleton,
            clip,
            &rig.skeleton,
            &recon,
            &map,
            unit_scale_mm / 10.0,
        )?;
        per_motion.push(MotionMetrics {
            name: clip.name.clone(),
            frames: clip.len(),
            mjpe_mm: Some(mjpe),
            ee_cm: EeErrors::from_map(&ee),
        });
    }
    let ident = format!("{}:{}", home_label(home), rig.skeleton.len());
    Ok(MetricsReport {
        aggregate: Aggregate::from_motions(&per_motion),
        per_motion,
        unit_scale_mm,
        skeletons: vec![ident],
        reference: None,
    })
}

fn home_label(d: Domain) -> &'static str {
    match d {
        Domain::Human => "human",
        Domain::Robot => "robot",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiling() {
        assert_eq!(tiling_starts(128, 64), vec![0, 64]);
        assert_eq!(tiling_starts(67, 64), vec![0, 3]);
        assert_eq!(tiling_starts(64, 64), vec![0]);
        assert!(tiling_starts(63, 64).is_empty());
    }
}
