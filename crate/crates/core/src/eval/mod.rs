//! Position-error metrics, cycle evaluation and report I/O.

mod metrics;
mod report;

pub use metrics::{
    cycle_evaluate, cycle_reconstruct, ee_map, end_effector_errors, mean_joint_position_error,
    positions_error, resample_nearest, retarget_clip, tiling_starts, EndEffectorMap,
};
pub use report::{
    read_report, render_reference_table, render_report_table, render_table, write_report,
    Aggregate, EeErrors, MethodReference, MetricsReport, MotionMetrics, ReferenceConstants,
    TableRow,
};

use thiserror::Error;

use crate::kinematics::KinematicsError;
use crate::net::NetError;

/// Millimetres per BVH unit assumed for centimetre files.
pub const DEFAULT_UNIT_SCALE_MM: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("frame counts differ: {a} vs {b}")]
    FrameCountMismatch { a: usize, b: usize },
    #[error("clip does not match skeleton: {0}")]
    SkeletonMismatch(String),
    #[error("unknown end-effector {0}")]
    UnknownEndEffector(String),
    #[error("clip {name} has {frames} frames, fewer than the {window}-frame window")]
    ClipTooShort {
        name: String,
        frames: usize,
        window: usize,
    },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("cannot write {path}: {message}")]
    DiskWrite { path: String, message: String },
    #[error("report {path}: {message}")]
    Report { path: String, message: String },
}
