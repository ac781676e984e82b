//! Retargeting network: feature layout, model and checkpoints.

mod checkpoint;
mod layout;
mod model;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use layout::{DomainSpec, Entity, FeatureLayout, NormStats, MIN_STD};
pub use model::{ArchConfig, BoundParams, Domain, ModelKind, RetargetModel, SkeletonPool};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::kinematics::KinematicsError;
use crate::skeleton::SkeletonError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("feature width mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("part counts differ: human {human}, robot {robot}")]
    PartCountMismatch { human: usize, robot: usize },
    #[error("body part {0} has no actuated joint or root translation")]
    EmptyPart(usize),
    #[error("window of shape {found:?} does not fit {expected} channels with an even length >= 8")]
    WindowShape { expected: usize, found: Vec<usize> },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionUnsupported(u8),
    #[error("checkpoint payload truncated: expected {expected} bytes, found {found}")]
    PayloadTruncated { expected: usize, found: usize },
    #[error("parameter {name}: header shape {found:?}, architecture expects {expected:?}")]
    HeaderShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
