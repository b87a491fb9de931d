//! Checkpoints: `manifest.json` (format version, model config, parameter
//! table, run metadata) plus `params.bin`, the little-endian `f32` values of
//! every parameter concatenated in manifest order.

use std::path::Path;

use morpheus_tensor::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::Model;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

/// Where in training a checkpoint was taken.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointMeta {
    pub stage: u8,
    pub epoch: usize,
    pub step: usize,
    pub seed: u64,
    /// Whether the stage-1 segmentation loss had been switched on.
    pub seg_enabled: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset into `params.bin`.
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: serde_json::Value,
    params: Vec<ParamEntry>,
    meta: CheckpointMeta,
}

/// Writes `dir/manifest.json` and `dir/params.bin`.
pub fn save_checkpoint(model: &Model, meta: &CheckpointMeta, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(model.store.num_scalars() * 4);
    let mut params = Vec::with_capacity(model.store.len());
    for (_, name, t) in model.store.iter() {
        params.push(ParamEntry { name: name.to_string(), shape: t.shape().to_vec(), dtype: "f32".into(), offset: blob.len() });
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: serde_json::to_value(&model.config)?,
        params,
        meta: meta.clone(),
    };
    let blob_path = dir.join(BLOB_FILE);
    std::fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&manifest_path, e))
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// First config field (dotted path) whose value differs.
fn first_difference(prefix: &str, a: &serde_json::Value, b: &serde_json::Value) -> Option<String> {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match y.get(k) {
                    Some(vb) => {
                        if let Some(d) = first_difference(&path, va, vb) {
                            return Some(d);
                        }
                    }
                    None => return Some(path),
                }
            }
            y.keys().find(|k| !x.contains_key(*k)).map(|k| if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") })
        }
        _ if a == b => None,
        _ => Some(if prefix.is_empty() { "config".into() } else { prefix.into() }),
    }
}

/// Loads a checkpoint; the model architecture comes from its manifest.
pub fn load_checkpoint(dir: &Path) -> Result<(Model, CheckpointMeta)> {
    let manifest = read_manifest(dir)?;
    let config: ModelConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
    let blob_path = dir.join(BLOB_FILE);
    let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let expected: usize = manifest.params.iter().map(|p| p.shape.iter().product::<usize>() * 4).sum();
    if blob.len() != expected {
        return Err(Error::Checkpoint(format!(
            "{BLOB_FILE} holds {} bytes but the manifest describes {expected}",
            blob.len()
        )));
    }
    let mut store = ParamStore::new();
    for p in &manifest.params {
        if p.dtype != "f32" {
            return Err(Error::Checkpoint(format!("parameter {}: dtype {} is not f32", p.name, p.dtype)));
        }
        let n: usize = p.shape.iter().product();
        let bytes = blob
            .get(p.offset..p.offset + n * 4)
            .ok_or_else(|| Error::Checkpoint(format!("parameter {}: offset {} out of range", p.name, p.offset)))?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        store.insert(p.name.clone(), Tensor::new(p.shape.clone(), data));
    }
    let model = Model::with_store(config, store)?;
    Ok((model, manifest.meta))
}

/// Loads a checkpoint and requires its config to equal `expected`; a
/// mismatch error names the first differing field.
pub fn load_checkpoint_expecting(dir: &Path, expected: &ModelConfig) -> Result<(Model, CheckpointMeta)> {
    let manifest = read_manifest(dir)?;
    let want = serde_json::to_value(expected)?;
    if let Some(field) = first_difference("", &want, &manifest.config) {
        return Err(Error::Checkpoint(format!(
            "config mismatch at {field}: checkpoint has {}, expected {}",
            lookup(&manifest.config, &field),
            lookup(&want, &field)
        )));
    }
    load_checkpoint(dir)
}

fn lookup(v: &serde_json::Value, path: &str) -> String {
    path.split('.')
        .try_fold(v, |v, k| v.get(k))
        .map(|v| v.to_string())
        .unwrap_or_else(|| "nothing".into())
}

/// Number of parameters listed in a checkpoint manifest.
pub fn manifest_param_count(dir: &Path) -> Result<usize> {
    Ok(read_manifest(dir)?.params.len())
}
