//! Parameter container: `"LFCK"`, u64 LE manifest length, JSON manifest,
//! then the tensors as little-endian buffers in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LfError, Result};

use super::{ParamStore, Real, Tensor};

const MAGIC: &[u8; 4] = b"LFCK";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    dtype: String,
    tensors: Vec<Entry>,
    #[serde(default)]
    config: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

pub fn encode_checkpoint<T: Real>(store: &ParamStore<T>, config: &serde_json::Value) -> Vec<u8> {
    let manifest = Manifest {
        dtype: T::DTYPE.into(),
        tensors: store
            .iter()
            .map(|(_, n, t)| Entry {
                name: n.into(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        config: config.clone(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(12 + json.len() + store.num_values() * T::BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, t) in store.iter() {
        t.data().iter().for_each(|v| v.write_le(&mut out));
    }
    out
}

/// Decodes a checkpoint written at either precision into `T`.
pub fn decode_checkpoint<T: Real>(
    bytes: &[u8],
    path: &Path,
) -> Result<(ParamStore<T>, serde_json::Value)> {
    let bad = |msg: &str| LfError::format(path, msg);
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing LFCK header"));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12usize.saturating_add(len))
        .ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(body).map_err(|e| bad(&format!("manifest: {e}")))?;
    let mut pos = 12 + len;
    let mut store = ParamStore::new();
    for e in manifest.tensors {
        let n: usize = e.shape.iter().product();
        let data: Vec<T> = match manifest.dtype.as_str() {
            "f32" => read_vals::<f32>(bytes, &mut pos, n).map(|v| v.into_iter().map(|x| T::of(x as f64)).collect()),
            "f64" => read_vals::<f64>(bytes, &mut pos, n).map(|v| v.into_iter().map(T::of).collect()),
            other => return Err(bad(&format!("unknown dtype {other}"))),
        }
        .ok_or_else(|| bad(&format!("truncated data for {}", e.name)))?;
        if !data.iter().all(|v| v.is_finite()) {
            return Err(bad(&format!("non-finite values in {}", e.name)));
        }
        store.add(e.name, Tensor::new(e.shape, data)?)?;
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok((store, manifest.config))
}

fn read_vals<U: Real>(bytes: &[u8], pos: &mut usize, n: usize) -> Option<Vec<U>> {
    let end = pos.checked_add(n.checked_mul(U::BYTES)?)?;
    let chunk = bytes.get(*pos..end)?;
    *pos = end;
    Some(chunk.chunks_exact(U::BYTES).map(U::read_le).collect())
}

pub fn save_checkpoint<T: Real>(
    path: &Path,
    store: &ParamStore<T>,
    config: &serde_json::Value,
) -> Result<()> {
    std::fs::write(path, encode_checkpoint(store, config)).map_err(|e| LfError::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<(ParamStore<T>, serde_json::Value)> {
    let bytes = std::fs::read(path).map_err(|e| LfError::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
