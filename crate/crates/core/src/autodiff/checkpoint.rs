//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"MNSNCKPT" | u32 version | u64 manifest_len | manifest (JSON) | u64 buffer_len | buffer
//! ```
//!
//! The manifest lists every tensor's name, shape and element offset into the
//! raw buffer, the dtype, and an arbitrary JSON config object.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::params::ParamSet;
use crate::autodiff::tensor::Tensor;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MNSNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointManifest {
    pub version: u32,
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
    pub config: serde_json::Value,
}

pub fn encode_checkpoint<T: Scalar>(params: &ParamSet<T>, config: &serde_json::Value) -> Vec<u8> {
    let mut offset = 0;
    let tensors = params
        .iter()
        .map(|(name, t)| {
            let e = TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += t.len();
            e
        })
        .collect();
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        dtype: T::DTYPE.to_string(),
        tensors,
        config: config.clone(),
    };
    let manifest = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut buffer = Vec::with_capacity(offset * T::BYTES);
    for t in params.tensors() {
        t.data().iter().for_each(|&v| v.write_le(&mut buffer));
    }
    let mut out = Vec::with_capacity(8 + 4 + 16 + manifest.len() + buffer.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&(buffer.len() as u64).to_le_bytes());
    out.extend_from_slice(&buffer);
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::CorruptCheckpoint(format!(
            "truncated while reading {what}"
        )));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn read_u64(bytes: &mut &[u8], what: &str) -> Result<usize, CheckpointError> {
    let raw = take(bytes, 8, what)?;
    Ok(u64::from_le_bytes(raw.try_into().unwrap()) as usize)
}

pub fn decode_checkpoint<T: Scalar>(
    bytes: &[u8],
) -> Result<(ParamSet<T>, serde_json::Value), CheckpointError> {
    let mut rest = bytes;
    if take(&mut rest, 8, "magic")? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::CorruptCheckpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut rest, 4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch(format!(
            "file version {version}, reader {CHECKPOINT_VERSION}"
        )));
    }
    let mlen = read_u64(&mut rest, "manifest length")?;
    let manifest: CheckpointManifest =
        serde_json::from_slice(take(&mut rest, mlen, "manifest")?)
            .map_err(|e| CheckpointError::CorruptCheckpoint(format!("manifest: {e}")))?;
    if manifest.version != version {
        return Err(CheckpointError::CorruptCheckpoint(
            "manifest version disagrees with header".into(),
        ));
    }
    if manifest.dtype != T::DTYPE {
        return Err(CheckpointError::VersionMismatch(format!(
            "dtype {} read as {}",
            manifest.dtype,
            T::DTYPE
        )));
    }
    let blen = read_u64(&mut rest, "buffer length")?;
    let buffer = take(&mut rest, blen, "buffer")?;
    if !rest.is_empty() {
        return Err(CheckpointError::CorruptCheckpoint("trailing bytes".into()));
    }
    let total: usize = manifest
        .tensors
        .iter()
        .map(|e| e.shape.iter().product::<usize>())
        .sum();
    if total * T::BYTES != blen {
        return Err(CheckpointError::CorruptCheckpoint(format!(
            "manifest describes {} bytes, buffer holds {blen}",
            total * T::BYTES
        )));
    }
    let mut params = ParamSet::new();
    for e in &manifest.tensors {
        let n: usize = e.shape.iter().product();
        let start = e.offset * T::BYTES;
        let end = start + n * T::BYTES;
        if end > buffer.len() {
            return Err(CheckpointError::CorruptCheckpoint(format!(
                "tensor {} overruns buffer",
                e.name
            )));
        }
        let data = buffer[start..end]
            .chunks_exact(T::BYTES)
            .map(T::read_le)
            .collect();
        let t = Tensor::new(e.shape.clone(), data)
            .map_err(|err| CheckpointError::CorruptCheckpoint(err.to_string()))?;
        params.insert(e.name.clone(), t);
    }
    Ok((params, manifest.config))
}

/// Writes via a temporary sibling file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn save_params<T: Scalar>(
    path: &Path,
    params: &ParamSet<T>,
    config: &serde_json::Value,
) -> Result<(), CheckpointError> {
    write_atomic(path, &encode_checkpoint(params, config))?;
    Ok(())
}

pub fn load_params<T: Scalar>(
    path: &Path,
) -> Result<(ParamSet<T>, serde_json::Value), CheckpointError> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint into an existing parameter set whose layout must match.
pub fn load_into<T: Scalar>(
    path: &Path,
    target: &mut ParamSet<T>,
) -> Result<serde_json::Value, CheckpointError> {
    let (loaded, config) = load_params(path)?;
    if !target.same_layout(&loaded) {
        return Err(CheckpointError::VersionMismatch(
            "checkpoint parameter layout differs from the model".into(),
        ));
    }
    target.assign(&loaded).expect("layout checked");
    Ok(config)
}
