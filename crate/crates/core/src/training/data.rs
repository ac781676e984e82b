use crate::autodiff::Tensor;
use crate::motion::MotionClip;
use crate::net::{FeatureLayout, NormStats, MIN_STD};

use super::TrainError;

/// Start frames of the windows of a clip with `n` frames.
pub fn window_starts(n: usize, length: usize, stride: usize) -> Vec<usize> {
    if n < length || length == 0 {
        return Vec::new();
    }
    (0..=(n - length) / stride.max(1))
        .map(|k| k * stride)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowIndex {
    /// `(clip, start)` pairs.
    pub windows: Vec<(usize, usize)>,
    /// Clips shorter than one window.
    pub skipped: Vec<usize>,
}

pub fn make_windows(clips: &[MotionClip], length: usize, stride: usize) -> WindowIndex {
    let mut index = WindowIndex::default();
    for (c, clip) in clips.iter().enumerate() {
        let starts = window_starts(clip.len(), length, stride);
        if starts.is_empty() {
            log::warn!(
                "clip {} has {} frames, shorter than the {length}-frame window; skipped",
                clip.name,
                clip.len()
            );
            index.skipped.push(c);
        }
        index.windows.extend(starts.into_iter().map(|s| (c, s)));
    }
    index
}

/// Per-channel population mean and standard deviation over every frame;
/// root-translation channels are divided by `height` first.
pub fn compute_norm_stats(
    clips: &[MotionClip],
    layout: &FeatureLayout,
    height: f64,
) -> Result<NormStats, TrainError> {
    let frames: usize = clips.iter().map(MotionClip::len).sum();
    if frames == 0 {
        return Err(TrainError::EmptyCorpus(
            "no frames to compute statistics from".into(),
        ));
    }
    let features: Vec<Tensor> = clips.iter().map(|c| layout.clip_features(c)).collect();
    let unit = |c: usize| {
        if c >= layout.translation_row {
            height
        } else {
            1.0
        }
    };
    let mut mean = vec![0.0; layout.width];
    let mut std = vec![0.0; layout.width];
    for (c, m) in mean.iter_mut().enumerate() {
        let sum: f64 = features.iter().map(|f| row(f, c).iter().sum::<f64>()).sum();
        *m = sum / unit(c) / frames as f64;
    }
    for (c, s) in std.iter_mut().enumerate() {
        let sq: f64 = features
            .iter()
            .map(|f| {
                row(f, c)
                    .iter()
                    .map(|v| (v / unit(c) - mean[c]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        *s = (sq / frames as f64).sqrt().max(MIN_STD);
    }
    Ok(NormStats { mean, std })
}

fn row(f: &Tensor, c: usize) -> &[f64] {
    let n = f.shape()[1];
    &f.data()[c * n..(c + 1) * n]
}

/// Windowed training corpus of one domain; features are raw.
#[derive(Debug, Clone)]
pub struct DomainData {
    pub features: Vec<Tensor>,
    pub windows: Vec<(usize, usize)>,
    pub width: usize,
}

impl DomainData {
    pub fn new(clips: &[MotionClip], layout: &FeatureLayout, length: usize, stride: usize) -> Self {
        Self {
            features: clips.iter().map(|c| layout.clip_features(c)).collect(),
            windows: make_windows(clips, length, stride).windows,
            width: layout.width,
        }
    }

    /// Raw `[B, F, T]` batch of the given window ids.
    pub fn batch(&self, ids: &[usize], length: usize) -> Tensor {
        let f = self.width;
        let mut data = Vec::with_capacity(ids.len() * f * length);
        for &id in ids {
            let (clip, start) = self.windows[id];
            let feats = &self.features[clip];
            for c in 0..f {
                data.extend_from_slice(&row(feats, c)[start..start + length]);
            }
        }
        Tensor::new(vec![ids.len(), f, length], data).expect("sized")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Pose;

    #[test]
    fn window_counts() {
        assert_eq!(window_starts(6380, 64, 32).len(), 198);
        assert_eq!(window_starts(64, 64, 32), vec![0]);
        assert!(window_starts(63, 64, 32).is_empty());
    }

    #[test]
    fn short_clips_are_skipped() {
        let clip = |n: usize| MotionClip::new("c", 0.02, vec![Pose::identity(1); n]);
        let index = make_windows(&[clip(63), clip(96)], 64, 32);
        assert_eq!(index.skipped, vec![0]);
        assert_eq!(index.windows, vec![(1, 0), (1, 32)]);
    }
}
