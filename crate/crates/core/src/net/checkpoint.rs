//! Binary checkpoint: magic, version byte, little-endian `u32` header
//! length, JSON header, then every parameter as little-endian `f64` in
//! header order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::{DomainSpec, NormStats};
use super::model::{ArchConfig, ModelKind, RetargetModel};
use super::NetError;
use crate::autodiff::Tensor;
use crate::skeleton::{Joint, Skeleton, SkeletonConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NMRT";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct DomainHeader {
    joints: Vec<Joint>,
    config: SkeletonConfig,
    stats: NormStats,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    arch: ArchConfig,
    human: DomainHeader,
    robot: DomainHeader,
    params: Vec<ParamEntry>,
}

fn domain_header(d: &DomainSpec) -> DomainHeader {
    DomainHeader {
        joints: d.rig.skeleton.joints().to_vec(),
        config: d.rig.config.clone(),
        stats: d.stats.clone(),
    }
}

fn domain_from(h: DomainHeader) -> Result<DomainSpec, NetError> {
    let skeleton = Skeleton::new(h.joints)?;
    let rig = h.config.bind(&skeleton)?;
    DomainSpec::new(rig, h.stats)
}

pub fn write_checkpoint(model: &RetargetModel) -> Vec<u8> {
    let header = Header {
        kind: model.kind,
        arch: model.arch,
        human: domain_header(model.domain(super::Domain::Human)),
        robot: domain_header(model.domain(super::Domain::Robot)),
        params: model
            .expected_shapes()
            .into_iter()
            .map(|(name, shape)| ParamEntry { name, shape })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let payload: usize = model.params().iter().map(Tensor::numel).sum();
    let mut out = Vec::with_capacity(9 + json.len() + 8 * payload);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<RetargetModel, NetError> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(NetError::BadMagic);
    }
    let version = *bytes.get(4).ok_or(NetError::PayloadTruncated {
        expected: 9,
        found: bytes.len(),
    })?;
    if version != CHECKPOINT_VERSION {
        return Err(NetError::VersionUnsupported(version));
    }
    if bytes.len() < 9 {
        return Err(NetError::PayloadTruncated {
            expected: 9,
            found: bytes.len(),
        });
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let body = &bytes[9..];
    if body.len() < header_len {
        return Err(NetError::PayloadTruncated {
            expected: 9 + header_len,
            found: bytes.len(),
        });
    }
    let header: Header =
        serde_json::from_slice(&body[..header_len]).map_err(|e| NetError::Header(e.to_string()))?;
    let human = domain_from(header.human)?;
    let robot = domain_from(header.robot)?;
    let mut model = RetargetModel::with_zero_params(header.kind, header.arch, human, robot)?;

    let expected = model.expected_shapes();
    if expected.len() != header.params.len() {
        return Err(NetError::Header(format!(
            "{} parameters listed, architecture has {}",
            header.params.len(),
            expected.len()
        )));
    }
    for ((name, shape), entry) in expected.iter().zip(&header.params) {
        if *name != entry.name || *shape != entry.shape {
            return Err(NetError::HeaderShapeMismatch {
                name: entry.name.clone(),
                expected: shape.clone(),
                found: entry.shape.clone(),
            });
        }
    }

    let payload = &body[header_len..];
    let total: usize = expected
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum();
    if payload.len() != 8 * total {
        return Err(NetError::PayloadTruncated {
            expected: 9 + header_len + 8 * total,
            found: bytes.len(),
        });
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let params = expected
        .into_iter()
        .map(|(_, shape)| {
            let n = shape.iter().product();
            Tensor::new(shape, values.by_ref().take(n).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    model.replace_params(params);
    Ok(model)
}

pub fn save_checkpoint(model: &RetargetModel, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<RetargetModel, NetError> {
    read_checkpoint(&std::fs::read(path)?)
}
