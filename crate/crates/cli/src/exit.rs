use std::fmt;

use retarget_core::bvh::BvhError;
use retarget_core::eval::EvalError;
use retarget_core::net::NetError;
use retarget_core::training::TrainError;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Data = 3,
    Checkpoint = 4,
    Internal = 5,
}

/// An error tagged with the exit status it should produce.
#[derive(Debug)]
pub struct Coded {
    pub kind: ExitKind,
    pub source: anyhow::Error,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl std::error::Error for Coded {}

pub fn coded(kind: ExitKind, source: impl Into<anyhow::Error>) -> anyhow::Error {
    Coded {
        kind,
        source: source.into(),
    }
    .into()
}

pub trait CodeExt<T> {
    fn code(self, kind: ExitKind) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> CodeExt<T> for Result<T, E> {
    fn code(self, kind: ExitKind) -> anyhow::Result<T> {
        self.map_err(|e| coded(kind, e))
    }
}

pub fn exit_kind(err: &anyhow::Error) -> ExitKind {
    err.downcast_ref::<Coded>()
        .map_or(ExitKind::Internal, |c| c.kind)
}

pub fn bvh(e: BvhError) -> anyhow::Error {
    coded(ExitKind::Data, e)
}

pub fn train(e: TrainError) -> anyhow::Error {
    let kind = match &e {
        TrainError::Config(_) => ExitKind::Usage,
        TrainError::EmptyCorpus(_) | TrainError::Net(_) => ExitKind::Data,
        TrainError::DiskWrite { .. } => ExitKind::Internal,
    };
    coded(kind, e)
}

pub fn eval(e: EvalError) -> anyhow::Error {
    let kind = match &e {
        EvalError::DiskWrite { .. } | EvalError::Report { .. } => ExitKind::Internal,
        EvalError::Net(n) => net_kind(n),
        _ => ExitKind::Data,
    };
    coded(kind, e)
}

fn net_kind(e: &NetError) -> ExitKind {
    match e {
        NetError::BadMagic
        | NetError::VersionUnsupported(_)
        | NetError::PayloadTruncated { .. }
        | NetError::HeaderShapeMismatch { .. }
        | NetError::Header(_) => ExitKind::Checkpoint,
        NetError::Io(_) => ExitKind::Internal,
        _ => ExitKind::Data,
    }
}
