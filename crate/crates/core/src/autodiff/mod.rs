//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Operations are recorded on a [`Tape`] as they execute; every node keeps
//! an owned copy of its forward value, so later mutation of caller buffers
//! never reaches the recorded graph. [`Tape::backward`] walks the nodes in
//! reverse insertion order once.

mod adam;
mod conv;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{Conv1dSpec, ConvGroup, PadMode};
pub use tape::{CustomOp, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward needs a 0-d loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("tape already consumed by backward")]
    AlreadyConsumed,
    #[error("{op}: {message}")]
    InvalidArgument { op: &'static str, message: String },
}

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;
