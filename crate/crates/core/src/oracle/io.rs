//! Weight files: an 8-byte magic, a little-endian `u32` version, a `u64`
//! header length, a JSON header (config, input scaling, tensor table), then every
//! parameter as a little-endian `f64` in tensor-table order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::network::{InputScaling, OracleConfig, OracleModel, TensorInfo};

const MAGIC: &[u8; 8] = b"JSPQORCL";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: OracleConfig,
    scaling: InputScaling,
    tensors: Vec<TensorInfo>,
}

pub fn to_bytes(model: &OracleModel) -> Vec<u8> {
    let header = serde_json::to_vec(&Header { config: *model.config(), scaling: model.scaling().clone(), tensors: model.tensors().to_vec() })
        .expect("header is always serializable");
    let mut out = Vec::with_capacity(20 + header.len() + 8 * model.n_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<OracleModel> {
    let bad = |m: &str| Error::WeightFormat(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not an oracle weight file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::WeightFormat(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = bytes.get(20..).ok_or_else(|| bad("truncated header"))?;
    let header_bytes = body.get(..header_len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(header_bytes)?;
    let payload = &body[header_len..];
    if payload.len() % 8 != 0 {
        return Err(bad("payload is not a whole number of f64 values"));
    }
    let params: Vec<f64> =
        payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let model = OracleModel::from_parts(header.config, params, header.scaling)?;
    if model.tensors() != header.tensors.as_slice() {
        return Err(bad("tensor table does not match the configured architecture"));
    }
    Ok(model)
}

pub fn save_weights(path: &Path, model: &OracleModel) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<OracleModel> {
    from_bytes(&fs::read(path)?)
}
