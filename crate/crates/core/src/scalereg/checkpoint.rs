//! `SRK1` checkpoint container.
//!
//! ```text
//! magic "SRK1" | u32 version | u32 header length | JSON header
//! | f64 parameters (per layer: weights row-major, then bias)
//! | f64 per-epoch loss history
//! ```
//! Integers and floats are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, RegressorParams, TrainConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SRK1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: RegressorParams,
    pub config: TrainConfig,
    pub history: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerInfo {
    name: String,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    layer_dims: Vec<usize>,
    mode: Mode,
    config: TrainConfig,
    optimizer: OptimizerInfo,
    param_count: usize,
    history_len: usize,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let header = Header {
        layer_dims: ckpt.params.layer_dims(),
        mode: ckpt.params.mode,
        config: ckpt.config.clone(),
        optimizer: OptimizerInfo { name: "adam".into(), beta1: ADAM_BETA1, beta2: ADAM_BETA2, eps: ADAM_EPS },
        param_count: ckpt.params.param_count(),
        history_len: ckpt.history.len(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * (header.param_count + header.history_len));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for x in ckpt.params.flat().chain(ckpt.history.iter().copied()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let fmt = |offset: usize, msg: String| Error::Format { offset: offset as u64, msg };
    if bytes.len() < 12 {
        return Err(fmt(0, "checkpoint shorter than its fixed header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(fmt(0, "not an SRK1 checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(fmt(4, format!("unsupported checkpoint version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = 12usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| fmt(8, format!("header length {header_len} exceeds file size")))?;
    let header: Header = serde_json::from_slice(&bytes[12..body]).map_err(|e| fmt(12, format!("bad header: {e}")))?;

    let expected = 8 * (header.param_count + header.history_len);
    if bytes.len() - body != expected {
        return Err(fmt(body, format!("payload is {} bytes, expected {expected}", bytes.len() - body)));
    }
    let values: Vec<f64> = bytes[body..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (weights, history) = values.split_at(header.param_count);
    let params =
        RegressorParams::from_flat(&header.layer_dims, header.mode, weights).map_err(|e| fmt(body, e.to_string()))?;
    if !params.is_finite() {
        return Err(fmt(body, "non-finite parameter".into()));
    }
    Ok(Checkpoint { params, config: header.config, history: history.to_vec() })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(ckpt)?)
        .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalereg::init_params;

    fn sample() -> Checkpoint {
        let params = init_params(&[6, 5, 3, 1], Mode::RenderOnly, 4).unwrap();
        let config = TrainConfig { epochs: 3, mode: Mode::RenderOnly, hidden: vec![5, 3], ..Default::default() };
        Checkpoint { params, config, history: vec![0.9, 0.5, 1.0 / 3.0] }
    }

    #[test]
    fn round_trip_bit_identical() {
        let c = sample();
        let back = decode_checkpoint(&encode_checkpoint(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let bits = |p: &RegressorParams| p.flat().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(&c.params));
        assert_eq!(back.history.len(), back.config.epochs);
    }

    #[test]
    fn version_and_corruption_rejected() {
        let bytes = encode_checkpoint(&sample()).unwrap();
        let mut v99 = bytes.clone();
        v99[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(decode_checkpoint(&v99), Err(Error::Format { offset: 4, .. })));

        assert!(decode_checkpoint(&bytes[..bytes.len() - 8]).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode_checkpoint(&bad_magic).is_err());
        let mut bad_header = bytes;
        bad_header[12] = b'!';
        assert!(decode_checkpoint(&bad_header).is_err());
    }
}
