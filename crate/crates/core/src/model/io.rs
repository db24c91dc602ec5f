//! Parameter files: `u64` little-endian header length, a JSON header naming
//! every tensor and its shape, then all values as little-endian `f32` in
//! header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DynModel, ModelError, ModelKind};
use crate::tensor::{ParamSet, ParamTensor};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamFileHeader {
    pub model: ModelKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<Real>,
    pub tensors: Vec<TensorEntry>,
}

pub fn save_params<W: Write>(model: &dyn DynModel, mut out: W) -> crate::Result<()> {
    let params = model.params();
    let header = ParamFileHeader {
        model: model.kind(),
        dim: model.dim(),
        decay: model.decay(),
        tensors: params
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), rows: p.rows, cols: p.cols })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::BadParams(e.to_string()))?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for p in params.iter() {
        for &x in p.data.iter() {
            out.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_params<R: Read>(mut input: R) -> crate::Result<(ParamFileHeader, ParamSet)> {
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 24 {
        return Err(ModelError::BadParams(format!("header length {len} is implausible")).into());
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json)?;
    let header: ParamFileHeader =
        serde_json::from_slice(&json).map_err(|e| ModelError::BadParams(e.to_string()))?;
    let mut set = ParamSet::new();
    for t in &header.tensors {
        let mut bytes = vec![0u8; t.rows * t.cols * 4];
        input
            .read_exact(&mut bytes)
            .map_err(|_| ModelError::BadParams(format!("tensor {} is truncated", t.name)))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as Real)
            .collect();
        set.push(ParamTensor::new(t.name.clone(), t.rows, t.cols, data)?);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(ModelError::BadParams("trailing bytes after tensor data".into()).into());
    }
    Ok((header, set))
}

/// Copies loaded values into `model`, checking names and shapes.
pub fn apply_params(model: &mut dyn DynModel, loaded: &ParamSet) -> crate::Result<()> {
    let target = model.params_mut();
    if target.len() != loaded.len() {
        return Err(ModelError::BadParams(format!(
            "file has {} tensors, model has {}",
            loaded.len(),
            target.len()
        ))
        .into());
    }
    for (i, p) in loaded.iter().enumerate() {
        let q = target.get(i);
        if q.name != p.name || q.rows != p.rows || q.cols != p.cols {
            return Err(ModelError::BadParams(format!(
                "tensor {i}: file has {} {}x{}, model expects {} {}x{}",
                p.name, p.rows, p.cols, q.name, q.rows, q.cols
            ))
            .into());
        }
        target.set_data(i, p.data.to_vec())?;
    }
    Ok(())
}
