//! Checkpoint layout: a JSON manifest (model spec, tensor table, metadata)
//! next to a sidecar file of little-endian f64 values, tensors concatenated
//! in manifest order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{ModelSpec, RecurrentModel};
use crate::error::{Error, Result};

pub const FORMAT: &str = "ddsp-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub spec: ModelSpec,
    /// Sidecar file name, relative to the manifest.
    pub params_file: String,
    pub param_count: usize,
    pub tensors: Vec<TensorEntry>,
    /// Free-form training metadata (window size, scaler, config, seed, ...).
    pub meta: serde_json::Value,
}

pub fn sidecar_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("f64")
}

pub fn save(model: &RecurrentModel, meta: serde_json::Value, manifest_path: &Path) -> Result<()> {
    let sidecar = sidecar_path(manifest_path);
    let mut offset = 0;
    let tensors = model
        .tensors()
        .into_iter()
        .map(|(name, t)| {
            let e = TensorEntry {
                name,
                offset,
                len: t.len(),
            };
            offset += t.len();
            e
        })
        .collect();
    let manifest = Manifest {
        format: FORMAT.into(),
        spec: model.spec.clone(),
        params_file: sidecar
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        param_count: offset,
        tensors,
        meta,
    };
    let bytes: Vec<u8> = model.flat_params().iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(&sidecar, bytes).map_err(|e| Error::io(&sidecar, e))?;
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(manifest_path, json + "\n").map_err(|e| Error::io(manifest_path, e))?;
    Ok(())
}

pub fn load(manifest_path: &Path) -> Result<(RecurrentModel, Manifest)> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format != FORMAT {
        return Err(Error::invalid(format!("unknown checkpoint format `{}`", manifest.format)));
    }
    let sidecar = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&manifest.params_file);
    let bytes = std::fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    if bytes.len() != manifest.param_count * 8 {
        return Err(Error::Shape {
            context: "checkpoint sidecar bytes",
            expected: manifest.param_count * 8,
            actual: bytes.len(),
        });
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut model = RecurrentModel::new(manifest.spec.clone(), 0)?;
    model.set_flat_params(&flat)?;
    for (entry, (name, t)) in manifest.tensors.iter().zip(model.tensors()) {
        if entry.name != name || entry.len != t.len() {
            return Err(Error::invalid(format!("checkpoint tensor `{}` does not match spec", entry.name)));
        }
    }
    Ok((model, manifest))
}
