//! Deterministic paired-skeleton corpora: a small humanoid and a scaled
//! robot variant with extra arm joints, driven by sums of sinusoids.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::write_bvh;
use crate::kinematics::rotation::{euler_to_quaternion, Axis, Quaternion, Vec3};
use crate::kinematics::{forward_kinematics, Pose, RootMode};
use crate::motion::MotionClip;
use crate::skeleton::{
    ChannelKind, EndEffectors, Joint, JointKind, Rig, Skeleton, SkeletonConfig, SkeletonError,
    TposeTolerances,
};

pub const FIXTURE_FRAME_TIME: f64 = 0.02;
const ORDER: [Axis; 3] = [Axis::Z, Axis::X, Axis::Y];
const BVH_PRECISION: usize = 9;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub seed: u64,
    pub motions: usize,
    pub frames: usize,
    /// Limb-length factor of the robot domain.
    pub scale: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub thigh: f64,
    /// Actuated joints inserted into each robot upper arm.
    pub extra_arm_joints: usize,
    /// Band of the trajectory frequencies, Hz.
    pub frequency_band: (f64, f64),
    /// Per-axis bound on the summed sinusoid amplitudes, degrees.
    pub max_amplitude_deg: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            motions: 24,
            frames: 200,
            scale: 1.3,
            upper_arm: 28.0,
            forearm: 25.0,
            thigh: 45.0,
            extra_arm_joints: 1,
            frequency_band: (0.2, 1.5),
            max_amplitude_deg: 45.0,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: &str| Err(FixtureError::InvalidSpec(m.into()));
        let nyquist = 0.5 / FIXTURE_FRAME_TIME;
        let (lo, hi) = self.frequency_band;
        if !(self.scale > 0.0) {
            return bad("scale must be positive");
        }
        if !(lo > 0.0 && lo <= hi && hi < nyquist) {
            return bad("frequency band must satisfy 0 < low <= high < Nyquist (25 Hz)");
        }
        if !(self.upper_arm > 0.0 && self.forearm > 0.0 && self.thigh > 0.0) {
            return bad("link lengths must be positive");
        }
        if !(self.max_amplitude_deg >= 0.0 && self.max_amplitude_deg < 60.0) {
            return bad("max_amplitude_deg must lie in [0, 60)");
        }
        if self.motions == 0 || self.frames == 0 {
            return bad("motions and frames must be at least 1");
        }
        Ok(())
    }
}

/// Skeleton, config and clips of one domain. End-effector names follow the
/// `<parent>_end` convention the BVH reader gives End Sites.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureDomain {
    pub skeleton: Skeleton,
    pub config: SkeletonConfig,
    pub clips: Vec<MotionClip>,
}

impl FixtureDomain {
    pub fn rig(&self) -> Rig {
        self.config
            .bind(&self.skeleton)
            .expect("fixture config matches its skeleton")
    }

    pub fn total_frames(&self) -> usize {
        self.clips.iter().map(MotionClip::len).sum()
    }

    /// `(training, held_out)` split keeping the last `held_out` clips aside.
    pub fn split(&self, held_out: usize) -> (Vec<MotionClip>, Vec<MotionClip>) {
        let cut = self.clips.len().saturating_sub(held_out);
        (self.clips[..cut].to_vec(), self.clips[cut..].to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub human: FixtureDomain,
    pub robot: FixtureDomain,
}

struct Builder {
    joints: Vec<Joint>,
    kinds: BTreeMap<String, JointKind>,
    parts: BTreeMap<String, usize>,
}

const ROTATION: [ChannelKind; 3] = [
    ChannelKind::Zrotation,
    ChannelKind::Xrotation,
    ChannelKind::Yrotation,
];
const POSITION: [ChannelKind; 3] = [
    ChannelKind::Xposition,
    ChannelKind::Yposition,
    ChannelKind::Zposition,
];

impl Builder {
    fn add(
        &mut self,
        name: &str,
        parent: Option<&str>,
        offset: Vec3,
        channels: &[ChannelKind],
        kind: JointKind,
        part: usize,
    ) {
        let parent = parent.map(|p| {
            self.joints
                .iter()
                .position(|j| j.name == p)
                .expect("parent added first")
        });
        self.joints.push(Joint {
            name: name.into(),
            parent,
            offset,
            channels: channels.to_vec(),
            kind,
            end_site: kind == JointKind::EndEffector,
        });
        self.kinds.insert(name.into(), kind);
        self.parts.insert(name.into(), part);
    }
}

fn scaled(v: Vec3, s: f64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

/// Builds one domain's skeleton. `robot` switches to the scaled variant
/// with extra upper-arm joints and reduced root/chest channels.
fn build_skeleton(
    spec: &FixtureSpec,
    robot: bool,
) -> Result<(Skeleton, SkeletonConfig), FixtureError> {
    use JointKind::{Actuated as A, EndEffector as E, Fixed as F};
    let s = if robot { spec.scale } else { 1.0 };
    let mut b = Builder {
        joints: Vec::new(),
        kinds: BTreeMap::new(),
        parts: BTreeMap::new(),
    };
    let root_channels: Vec<ChannelKind> = if robot {
        POSITION.to_vec()
    } else {
        POSITION.iter().chain(&ROTATION).copied().collect()
    };
    let chest_channels: &[ChannelKind] = if robot { &[] } else { &ROTATION };

    b.add("root", None, [0.0; 3], &root_channels, F, 0);
    b.add(
        "spine",
        Some("root"),
        scaled([0.0, 10.0, 0.0], s),
        &ROTATION,
        A,
        0,
    );
    b.add(
        "chest",
        Some("spine"),
        scaled([0.0, 30.0, 0.0], s),
        chest_channels,
        F,
        0,
    );
    b.add(
        "neck",
        Some("chest"),
        scaled([0.0, 15.0, 0.0], s),
        &ROTATION,
        A,
        0,
    );
    b.add(
        "neck_end",
        Some("neck"),
        scaled([0.0, 15.0, 0.0], s),
        &[],
        E,
        0,
    );

    for (side, sign, part) in [("l", 1.0, 1), ("r", -1.0, 2)] {
        let shoulder = format!("{side}_shoulder");
        b.add(
            &shoulder,
            Some("chest"),
            scaled([sign * 15.0, 0.0, 0.0], s),
            &ROTATION,
            A,
            part,
        );
        let segments = if robot { spec.extra_arm_joints + 1 } else { 1 };
        let piece = spec.upper_arm * s / segments as f64;
        let mut parent = shoulder;
        for k in 1..segments {
            let name = format!("{side}_upper{k}");
            b.add(
                &name,
                Some(&parent),
                [sign * piece, 0.0, 0.0],
                &ROTATION,
                A,
                part,
            );
            parent = name;
        }
        let elbow = format!("{side}_elbow");
        b.add(
            &elbow,
            Some(&parent),
            [sign * piece, 0.0, 0.0],
            &ROTATION,
            A,
            part,
        );
        let wrist = format!("{side}_wrist");
        let fore = [sign * spec.forearm * s, 0.0, 0.0];
        b.add(&wrist, Some(&elbow), fore, &ROTATION, A, part);
        b.add(
            &format!("{side}_wrist_end"),
            Some(&wrist),
            fore,
            &[],
            E,
            part,
        );
    }
    for (side, sign, part) in [("l", 1.0, 3), ("r", -1.0, 4)] {
        let hip = format!("{side}_hip");
        let knee = format!("{side}_knee");
        b.add(
            &hip,
            Some("root"),
            scaled([sign * 9.0, 0.0, 0.0], s),
            &ROTATION,
            A,
            part,
        );
        let leg = [0.0, -spec.thigh * s, 0.0];
        b.add(&knee, Some(&hip), leg, &ROTATION, A, part);
        b.add(&format!("{side}_knee_end"), Some(&knee), leg, &[], E, part);
    }

    let skeleton = Skeleton::new(b.joints)?;
    let rest = forward_kinematics(
        &skeleton,
        &Pose::identity(skeleton.len()),
        RootMode::RootLocal,
    )
    .expect("sized pose");
    let ys = rest.0.iter().map(|p| p[1]);
    let height = ys.clone().fold(f64::MIN, f64::max) - ys.fold(f64::MAX, f64::min);
    let link_pairs = ["neck", "l_shoulder", "r_shoulder"]
        .iter()
        .map(|n| (n.to_string(), n.to_string()))
        .collect();
    let config = SkeletonConfig {
        kinds: b.kinds,
        parts: b.parts,
        end_effectors: EndEffectors {
            head: "neck_end".into(),
            left_hand: "l_wrist_end".into(),
            right_hand: "r_wrist_end".into(),
        },
        height,
        tpose_tolerances: TposeTolerances::default(),
        chest: Some("chest".into()),
        link_pairs,
    };
    config.bind(&skeleton)?;
    Ok((skeleton, config))
}

/// One sum-of-sinusoids angle track, degrees.
struct Track {
    terms: Vec<(f64, f64, f64)>,
}

impl Track {
    fn random(rng: &mut ChaCha8Rng, spec: &FixtureSpec) -> Self {
        let n = 3;
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let budget = spec.max_amplitude_deg * rng.random_range(0.3..1.0);
        let (lo, hi) = spec.frequency_band;
        let terms = weights
            .iter()
            .map(|w| {
                let freq = if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (budget * w / total, freq, phase)
            })
            .collect();
        Self { terms }
    }

    fn at(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, f, p)| a * (std::f64::consts::TAU * f * t + p).sin())
            .sum()
    }
}

fn make_clip(
    name: String,
    skeleton: &Skeleton,
    height: f64,
    spec: &FixtureSpec,
    rng: &mut ChaCha8Rng,
) -> MotionClip {
    let tracks: Vec<Option<[Track; 3]>> = skeleton
        .joints()
        .iter()
        .map(|j| {
            (j.kind == JointKind::Actuated).then(|| {
                [
                    Track::random(rng, spec),
                    Track::random(rng, spec),
                    Track::random(rng, spec),
                ]
            })
        })
        .collect();
    let base = [0.0, height * 0.5625, 0.0];
    let sway: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                height * rng.random_range(0.005..0.03),
                rng.random_range(0.1..0.5),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let poses = (0..spec.frames)
        .map(|f| {
            let t = f as f64 * FIXTURE_FRAME_TIME;
            let rotations = tracks
                .iter()
                .map(|track| match track {
                    Some(axes) => {
                        euler_to_quaternion([axes[0].at(t), axes[1].at(t), axes[2].at(t)], ORDER)
                    }
                    None => Quaternion::IDENTITY,
                })
                .collect();
            let mut root_translation = base;
            for (k, (a, freq, phase)) in sway.iter().enumerate() {
                root_translation[k] += a * (std::f64::consts::TAU * freq * t + phase).sin();
            }
            Pose {
                root_translation,
                rotations,
            }
        })
        .collect();
    MotionClip::new(name, FIXTURE_FRAME_TIME, poses)
}

pub fn make_fixture(spec: &FixtureSpec) -> Result<Fixture, FixtureError> {
    spec.validate()?;
    let mut domains = Vec::with_capacity(2);
    for (stream, robot) in [(0u64, false), (1, true)] {
        let (skeleton, config) = build_skeleton(spec, robot)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        let prefix = if robot { "robot" } else { "human" };
        let clips = (0..spec.motions)
            .map(|m| {
                make_clip(
                    format!("{prefix}_{m:03}"),
                    &skeleton,
                    config.height,
                    spec,
                    &mut rng,
                )
            })
            .collect();
        domains.push(FixtureDomain {
            skeleton,
            config,
            clips,
        });
    }
    let robot = domains.pop().expect("two domains");
    let human = domains.pop().expect("two domains");
    Ok(Fixture { human, robot })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `{human,robot}/{<clip>.bvh, skeleton_config.json}` under `dir`.
pub fn write_fixture(fixture: &Fixture, dir: impl AsRef<Path>) -> Result<(), FixtureError> {
    for (name, domain) in [("human", &fixture.human), ("robot", &fixture.robot)] {
        let sub = dir.as_ref().join(name);
        std::fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        let config_path = sub.join("skeleton_config.json");
        std::fs::write(&config_path, domain.config.to_json()).map_err(io_err(&config_path))?;
        for clip in &domain.clips {
            let (doc, _) = clip.to_document(&domain.skeleton);
            let path = sub.join(format!("{}.bvh", clip.name));
            std::fs::write(&path, write_bvh(&doc, BVH_PRECISION)).map_err(io_err(&path))?;
        }
    }
    Ok(())
}
