//! Self-describing binary checkpoints for policy parameters.
//!
//! Layout: magic "FEPC", format version, the model config as TOML, named
//! tensor dimensions, tensor payloads as little-endian f32 in canonical
//! order, and a trailing SHA-256 of everything before it. Values are
//! rounded to f32 on save, so save -> load -> save is byte-identical.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::model::params::PolicyParams;
use crate::model::ModelConfig;

const MAGIC: &[u8; 4] = b"FEPC";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {got} (supported: {VERSION})")]
    UnsupportedVersion { got: u32 },
    #[error("checksum mismatch: file is truncated or corrupted")]
    ChecksumMismatch,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint was written for a different model: {0}")]
    ConfigMismatch(String),
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    push_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Malformed("unexpected end of data".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, CheckpointError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| CheckpointError::Malformed("invalid utf-8 in header".into()))
    }
}

/// Serializes parameters to the checkpoint byte format.
pub fn checkpoint_bytes(params: &PolicyParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);
    let config_toml =
        toml::to_string(&params.config).expect("model config serializes to TOML");
    push_str(&mut buf, &config_toml);
    let names = params.tensor_names();
    let tensors = params.tensors();
    push_u32(&mut buf, tensors.len() as u32);
    for (name, tensor) in names.iter().zip(&tensors) {
        push_str(&mut buf, name);
        push_u32(&mut buf, tensor.rows as u32);
        push_u32(&mut buf, tensor.cols as u32);
    }
    for tensor in &tensors {
        for &v in &tensor.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<(), CheckpointError> {
    Ok(fs::write(path, checkpoint_bytes(params))?)
}

/// Loads a checkpoint, verifying checksum, version, and internal shape
/// consistency. The result carries the config the file was written with.
pub fn load_checkpoint(path: &Path) -> Result<PolicyParams, CheckpointError> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 32 {
        return Err(CheckpointError::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != tail {
        return Err(CheckpointError::ChecksumMismatch);
    }
    let mut r = Reader { bytes: body, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { got: version });
    }
    let config: ModelConfig = toml::from_str(&r.str()?)
        .map_err(|e| CheckpointError::Malformed(format!("config block: {e}")))?;
    let mut params = PolicyParams::zeros(config);
    let expected_names = params.tensor_names();
    let n_tensors = r.u32()? as usize;
    if n_tensors != expected_names.len() {
        return Err(CheckpointError::Malformed(format!(
            "expected {} tensors, file lists {}",
            expected_names.len(),
            n_tensors
        )));
    }
    let mut dims = Vec::with_capacity(n_tensors);
    for expected in &expected_names {
        let name = r.str()?;
        if &name != expected {
            return Err(CheckpointError::Malformed(format!(
                "tensor order mismatch: expected {expected}, found {name}"
            )));
        }
        dims.push((r.u32()? as usize, r.u32()? as usize));
    }
    for (tensor, (name, (rows, cols))) in
        params.tensors_mut().iter_mut().zip(expected_names.iter().zip(&dims))
    {
        if tensor.rows != *rows || tensor.cols != *cols {
            return Err(CheckpointError::Malformed(format!(
                "tensor {name}: config implies {}x{}, file has {rows}x{cols}",
                tensor.rows, tensor.cols
            )));
        }
        for v in tensor.data.iter_mut() {
            let raw = r.take(4)?;
            *v = f32::from_le_bytes(raw.try_into().unwrap()) as f64;
        }
    }
    if r.at != body.len() {
        return Err(CheckpointError::Malformed("trailing bytes after payload".into()));
    }
    Ok(params)
}

/// Loads a checkpoint and insists it was written for `expected`; loading a
/// file trained for a different domain or model shape fails loudly.
pub fn load_checkpoint_for(
    path: &Path,
    expected: &ModelConfig,
) -> Result<PolicyParams, CheckpointError> {
    let params = load_checkpoint(path)?;
    if &params.config != expected {
        return Err(CheckpointError::ConfigMismatch(format!(
            "file: {:?}, wanted: {:?}",
            params.config, expected
        )));
    }
    Ok(params)
}
