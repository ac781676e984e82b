//! Skeleton topology with the three-way joint classification, config
//! binding, and the T-pose guideline lint.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::rotation::{is_permutation, norm3, Axis, RotationOrder, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl ChannelKind {
    pub fn parse(token: &str) -> Option<ChannelKind> {
        Some(match token {
            "Xposition" => ChannelKind::Xposition,
            "Yposition" => ChannelKind::Yposition,
            "Zposition" => ChannelKind::Zposition,
            "Xrotation" => ChannelKind::Xrotation,
            "Yrotation" => ChannelKind::Yrotation,
            "Zrotation" => ChannelKind::Zrotation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Xposition => "Xposition",
            ChannelKind::Yposition => "Yposition",
            ChannelKind::Zposition => "Zposition",
            ChannelKind::Xrotation => "Xrotation",
            ChannelKind::Yrotation => "Yrotation",
            ChannelKind::Zrotation => "Zrotation",
        }
    }

    pub fn rotation_axis(self) -> Option<Axis> {
        match self {
            ChannelKind::Xrotation => Some(Axis::X),
            ChannelKind::Yrotation => Some(Axis::Y),
            ChannelKind::Zrotation => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn position_axis(self) -> Option<Axis> {
        match self {
            ChannelKind::Xposition => Some(Axis::X),
            ChannelKind::Yposition => Some(Axis::Y),
            ChannelKind::Zposition => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn rotation(axis: Axis) -> ChannelKind {
        match axis {
            Axis::X => ChannelKind::Xrotation,
            Axis::Y => ChannelKind::Yrotation,
            Axis::Z => ChannelKind::Zrotation,
        }
    }

    pub fn position(axis: Axis) -> ChannelKind {
        match axis {
            Axis::X => ChannelKind::Xposition,
            Axis::Y => ChannelKind::Yposition,
            Axis::Z => ChannelKind::Zposition,
        }
    }
}

/// How a joint participates in forward kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JointKind {
    /// A real rotating joint; its rotation propagates to descendants.
    Actuated,
    /// Structural joint (root, chest) whose rotation is ignored.
    Fixed,
    /// Leaf marker placed at an end-effector.
    EndEffector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Vec3,
    pub channels: Vec<ChannelKind>,
    pub kind: JointKind,
    /// Materialized from a BVH `End Site` block.
    #[serde(default)]
    pub end_site: bool,
}

impl Joint {
    pub fn rotation_order(&self) -> Option<RotationOrder> {
        let axes: Vec<Axis> = self
            .channels
            .iter()
            .filter_map(|c| c.rotation_axis())
            .collect();
        match axes.as_slice() {
            [a, b, c] => Some([*a, *b, *c]),
            _ => None,
        }
    }

    pub fn has_position_channels(&self) -> bool {
        self.channels.iter().any(|c| c.position_axis().is_some())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("skeleton has no joints")]
    Empty,
    #[error("joint {index} ({name}): parent must precede the joint")]
    NotTopological { index: usize, name: String },
    #[error("joint {index} ({name}): more than one root")]
    MultipleRoots { index: usize, name: String },
    #[error("duplicate joint name {0}")]
    DuplicateName(String),
    #[error("joint {name}: {reason}")]
    InvalidChannels { name: String, reason: String },
    #[error("end-effector joint {0} has children")]
    EndEffectorNotLeaf(String),
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("config names unknown joint {0}")]
    UnknownJoint(String),
    #[error("config names no chest joint")]
    MissingChest,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A joint hierarchy in topological order (root first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self, SkeletonError> {
        if joints.is_empty() {
            return Err(SkeletonError::Empty);
        }
        let mut names = BTreeSet::new();
        let mut has_children = vec![false; joints.len()];
        for (i, j) in joints.iter().enumerate() {
            if !names.insert(j.name.as_str()) {
                return Err(SkeletonError::DuplicateName(j.name.clone()));
            }
            match j.parent {
                None if i != 0 => {
                    return Err(SkeletonError::MultipleRoots {
                        index: i,
                        name: j.name.clone(),
                    })
                }
                Some(p) if p >= i => {
                    return Err(SkeletonError::NotTopological {
                        index: i,
                        name: j.name.clone(),
                    })
                }
                Some(p) => has_children[p] = true,
                None => {}
            }
            validate_channels(j)?;
        }
        for (j, children) in joints.iter().zip(&has_children) {
            if j.kind == JointKind::EndEffector && *children {
                return Err(SkeletonError::EndEffectorNotLeaf(j.name.clone()));
            }
        }
        Ok(Self { joints })
    }

    pub fn root_index(&self) -> usize {
        0
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint(&self, i: usize) -> &Joint {
        &self.joints[i]
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.joints
            .iter()
            .enumerate()
            .filter(move |(_, j)| j.parent == Some(i))
            .map(|(c, _)| c)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.children(i).next().is_none()
    }

    pub fn kinds(&self) -> Vec<JointKind> {
        self.joints.iter().map(|j| j.kind).collect()
    }

    pub fn channel_count(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// First frame-table column of each joint.
    pub fn channel_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.joints
            .iter()
            .map(|j| {
                let at = acc;
                acc += j.channels.len();
                at
            })
            .collect()
    }

    /// Compares names, parents and channel layouts. Returns the first joint
    /// that differs.
    pub fn topology_difference(&self, other: &Skeleton) -> Option<String> {
        for i in 0..self.len().max(other.len()) {
            match (self.joints.get(i), other.joints.get(i)) {
                (Some(a), Some(b)) => {
                    if a.name != b.name || a.parent != b.parent || a.channels != b.channels {
                        return Some(b.name.clone());
                    }
                }
                (Some(a), None) => return Some(a.name.clone()),
                (None, Some(b)) => return Some(b.name.clone()),
                (None, None) => unreachable!(),
            }
        }
        None
    }

    pub fn max_offset_difference(&self, other: &Skeleton) -> f64 {
        self.joints
            .iter()
            .zip(&other.joints)
            .flat_map(|(a, b)| (0..3).map(move |k| (a.offset[k] - b.offset[k]).abs()))
            .fold(0.0, f64::max)
    }

    pub(crate) fn with_kinds(&self, kinds: &[JointKind]) -> Result<Skeleton, SkeletonError> {
        let joints = self
            .joints
            .iter()
            .zip(kinds)
            .map(|(j, k)| Joint {
                kind: *k,
                ..j.clone()
            })
            .collect();
        Skeleton::new(joints)
    }
}

fn validate_channels(j: &Joint) -> Result<(), SkeletonError> {
    let mut seen = BTreeSet::new();
    for c in &j.channels {
        if !seen.insert(c.name()) {
            return Err(SkeletonError::InvalidChannels {
                name: j.name.clone(),
                reason: format!("duplicate channel {}", c.name()),
            });
        }
    }
    let rot: Vec<Axis> = j
        .channels
        .iter()
        .filter_map(|c| c.rotation_axis())
        .collect();
    if !rot.is_empty() && (rot.len() != 3 || !is_permutation(&[rot[0], rot[1], rot[2]])) {
        return Err(SkeletonError::InvalidChannels {
            name: j.name.clone(),
            reason: "rotation channels must name all three axes".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TposeTolerances {
    pub length_ratio: f64,
    pub axis_ratio: f64,
}

impl Default for TposeTolerances {
    fn default() -> Self {
        Self {
            length_ratio: 0.1,
            axis_ratio: 0.7,
        }
    }
}

/// The three end-effectors tracked by the comparison metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndEffectors {
    pub head: String,
    pub left_hand: String,
    pub right_hand: String,
}

impl EndEffectors {
    pub const KEYS: [&'static str; 3] = ["head", "left_hand", "right_hand"];

    pub fn names(&self) -> [&str; 3] {
        [&self.head, &self.left_hand, &self.right_hand]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConfig {
    pub kinds: BTreeMap<String, JointKind>,
    pub parts: BTreeMap<String, usize>,
    pub end_effectors: EndEffectors,
    pub height: f64,
    #[serde(default)]
    pub tpose_tolerances: TposeTolerances,
    /// Joint whose outgoing links are compared against the reference (G2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chest: Option<String>,
    /// Chest-link correspondence: this skeleton's joint -> reference joint.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub link_pairs: BTreeMap<String, String>,
}

const REQUIRED_FIELDS: [&str; 4] = ["kinds", "parts", "end_effectors", "height"];

impl SkeletonConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SkeletonError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SkeletonError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SkeletonError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| schema("$", e))?;
        let obj = value
            .as_object()
            .ok_or_else(|| SkeletonError::SchemaError {
                path: "$".into(),
                message: "expected an object".into(),
            })?;
        for field in REQUIRED_FIELDS {
            if !obj.contains_key(field) {
                return Err(SkeletonError::SchemaError {
                    path: format!("$.{field}"),
                    message: "missing field".into(),
                });
            }
        }
        if let Some(ee) = obj["end_effectors"].as_object() {
            for key in EndEffectors::KEYS {
                if !ee.contains_key(key) {
                    return Err(SkeletonError::SchemaError {
                        path: format!("$.end_effectors.{key}"),
                        message: "missing field".into(),
                    });
                }
            }
        }
        let config: SkeletonConfig = serde_json::from_value(value).map_err(|e| schema("$", e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SkeletonError> {
        let ids: BTreeSet<usize> = self.parts.values().copied().collect();
        if ids.iter().copied().ne(0..ids.len()) {
            return Err(SkeletonError::SchemaError {
                path: "$.parts".into(),
                message: "non-contiguous parts".into(),
            });
        }
        if !(self.height > 0.0) {
            return Err(SkeletonError::SchemaError {
                path: "$.height".into(),
                message: "height must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn part_count(&self) -> usize {
        self.parts.values().copied().max().map_or(0, |m| m + 1)
    }

    /// Applies kinds and part ids to `skeleton`. Every joint must be named in
    /// both maps and every name must exist in the skeleton.
    pub fn bind(&self, skeleton: &Skeleton) -> Result<Rig, SkeletonError> {
        self.validate()?;
        for name in self.kinds.keys().chain(self.parts.keys()) {
            if skeleton.find(name).is_none() {
                return Err(SkeletonError::UnknownJoint(name.clone()));
            }
        }
        for name in self
            .end_effectors
            .names()
            .into_iter()
            .chain(self.chest.as_deref())
        {
            if skeleton.find(name).is_none() {
                return Err(SkeletonError::UnknownJoint(name.to_string()));
            }
        }
        let mut kinds = Vec::with_capacity(skeleton.len());
        let mut parts = Vec::with_capacity(skeleton.len());
        for j in skeleton.joints() {
            let kind = self
                .kinds
                .get(&j.name)
                .ok_or_else(|| SkeletonError::SchemaError {
                    path: format!("$.kinds.{}", j.name),
                    message: format!("joint {} has no kind assignment", j.name),
                })?;
            let part = self
                .parts
                .get(&j.name)
                .ok_or_else(|| SkeletonError::SchemaError {
                    path: format!("$.parts.{}", j.name),
                    message: format!("joint {} has no part assignment", j.name),
                })?;
            kinds.push(*kind);
            parts.push(*part);
        }
        let bound = skeleton.with_kinds(&kinds)?;
        let ee = self
            .end_effectors
            .names()
            .map(|n| bound.find(n).expect("checked above"));
        Ok(Rig {
            skeleton: bound,
            parts,
            part_count: self.part_count(),
            end_effectors: ee,
            config: self.clone(),
        })
    }
}

fn schema(path: &str, e: serde_json::Error) -> SkeletonError {
    SkeletonError::SchemaError {
        path: path.into(),
        message: e.to_string(),
    }
}

/// A skeleton with a config applied: kinds set, part ids resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub skeleton: Skeleton,
    pub parts: Vec<usize>,
    pub part_count: usize,
    /// Joint indices of head, left hand, right hand.
    pub end_effectors: [usize; 3],
    pub config: SkeletonConfig,
}

impl Rig {
    pub fn height(&self) -> f64 {
        self.config.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Guideline {
    /// Actuated links aligned to a dominant axis.
    AxisAlignment,
    /// Chest links mirror the reference orientation.
    ChestLinkOrientation,
    /// End-effector offset matches its parent link length.
    EndEffectorLength,
}

impl Guideline {
    pub fn code(self) -> &'static str {
        match self {
            Guideline::AxisAlignment => "G1",
            Guideline::ChestLinkOrientation => "G2",
            Guideline::EndEffectorLength => "G3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub guideline: Guideline,
    pub joint: usize,
    pub joint_name: String,
    /// Measured quantity: relative length deviation (G3), dominant-axis
    /// ratio (G1) or reference axis index (G2).
    pub value: f64,
    pub message: String,
}

fn dominant_axis(v: Vec3) -> usize {
    (0..3).fold(
        0,
        |best, k| if v[k].abs() > v[best].abs() { k } else { best },
    )
}

/// Lints a bound skeleton against the T-pose guidelines. `reference` is the
/// other domain's rig, needed only for the chest-link comparison.
pub fn check_tpose_guidelines(
    rig: &Rig,
    reference: Option<&Rig>,
) -> Result<Vec<Finding>, SkeletonError> {
    let sk = &rig.skeleton;
    let tol = rig.config.tpose_tolerances;
    let chest_name = rig
        .config
        .chest
        .as_ref()
        .ok_or(SkeletonError::MissingChest)?;
    let chest = sk
        .find(chest_name)
        .ok_or_else(|| SkeletonError::UnknownJoint(chest_name.clone()))?;
    let mut findings = Vec::new();

    for (i, j) in sk.joints().iter().enumerate() {
        if j.kind == JointKind::Actuated && i != sk.root_index() {
            let n = norm3(j.offset);
            if n > 0.0 {
                let ratio = j.offset[dominant_axis(j.offset)].abs() / n;
                if ratio < tol.axis_ratio {
                    findings.push(Finding {
                        guideline: Guideline::AxisAlignment,
                        joint: i,
                        joint_name: j.name.clone(),
                        value: ratio,
                        message: format!(
                            "link to {} is off-axis (dominant share {ratio:.3})",
                            j.name
                        ),
                    });
                }
            }
        }

        if j.parent == Some(chest) {
            if let (Some(reference), Some(ref_name)) =
                (reference, rig.config.link_pairs.get(&j.name))
            {
                let r = reference
                    .skeleton
                    .find(ref_name)
                    .ok_or_else(|| SkeletonError::UnknownJoint(ref_name.clone()))?;
                let ours = dominant_axis(j.offset);
                let theirs = dominant_axis(reference.skeleton.joint(r).offset);
                if ours != theirs {
                    findings.push(Finding {
                        guideline: Guideline::ChestLinkOrientation,
                        joint: i,
                        joint_name: j.name.clone(),
                        value: theirs as f64,
                        message: format!(
                            "chest link {} points along {:?}, reference {} along {:?}",
                            j.name,
                            Axis::from_index(ours),
                            ref_name,
                            Axis::from_index(theirs)
                        ),
                    });
                }
            }
        }

        if j.kind == JointKind::EndEffector {
            if let Some(p) = j.parent.filter(|&p| p != sk.root_index()) {
                let parent_len = norm3(sk.joint(p).offset);
                if parent_len > 0.0 {
                    let deviation = (norm3(j.offset) - parent_len).abs() / parent_len;
                    if deviation > tol.length_ratio {
                        findings.push(Finding {
                            guideline: Guideline::EndEffectorLength,
                            joint: i,
                            joint_name: j.name.clone(),
                            value: deviation,
                            message: format!(
                                "end-effector {} length deviates {deviation:.3} from parent link",
                                j.name
                            ),
                        });
                    }
                }
            }
        }
    }
    findings.sort_by_key(|f| (f.joint, f.guideline));
    Ok(findings)
}
