//! Rotation algebra and forward kinematics.
//!
//! Only `Actuated` joints contribute rotations: a `Fixed` or `EndEffector`
//! joint passes its parent's global orientation through unchanged, whatever
//! rotation the pose assigns it.

mod fk;
mod fk_diff;
pub mod rotation;

pub use fk::{forward_kinematics, motion_fk, write_positions_csv, JointPositions, Pose, RootMode};
pub use fk_diff::{fk_differentiable, FkLayout, FkOp};

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("pose has {found} entries, skeleton needs {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
