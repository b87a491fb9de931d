//! `index.json` datasets of aligned images, head masks, poses and
//! per-group coefficient targets.

use std::path::{Path, PathBuf};

use morpheus_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::codes::{CodeDims, SemanticCode};
use crate::data_io::image_io::{load_mask, load_rgb};
use crate::error::{Error, Result};
use crate::imaging::resize_bicubic;

pub const INDEX_FILE: &str = "index.json";

/// One entry of `index.json`; paths are relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub image: String,
    pub mask: String,
    pub pose: CameraPose,
    pub coeffs: SemanticCode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub pose: CameraPose,
    pub coeffs: SemanticCode,
}

/// Why an index entry was not accepted. `reason` starts with the field name.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejected {
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub records: Vec<DatasetRecord>,
    pub rejected: Vec<Rejected>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Fails with the first rejection, for consumers that need every record.
    pub fn require_clean(&self) -> Result<()> {
        match self.rejected.first() {
            None => Ok(()),
            Some(r) => Err(Error::Record {
                record: r.id.clone().unwrap_or_else(|| format!("#{}", r.index)),
                reason: r.reason.clone(),
            }),
        }
    }
}

impl DatasetRecord {
    /// Image `[res, res, 3]` and mask `[res, res, 1]`, resampled if the
    /// stored size differs.
    pub fn load(&self, res: usize) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let image = load_rgb(&self.image_path)?;
        let mask = load_mask(&self.mask_path)?;
        let fit = |t: Tensor<f32>, what: &str| -> Result<Tensor<f32>> {
            if t.dim(0) != t.dim(1) {
                return Err(Error::Record { record: self.id.clone(), reason: format!("{what} is not square") });
            }
            if t.dim(0) == res {
                return Ok(t);
            }
            Ok(resize_bicubic(&t, res, res))
        };
        let image = fit(image, "image")?;
        let mask = fit(mask, "mask")?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 });
        Ok((image, mask))
    }
}

fn check_entry(root: &Path, raw: &serde_json::Value, dims: &CodeDims) -> std::result::Result<DatasetRecord, String> {
    let obj = raw.as_object().ok_or("entry: not a JSON object")?;
    let field = |name: &str| obj.get(name).filter(|v| !v.is_null()).ok_or_else(|| format!("{name}: missing"));
    let id = field("id")?.as_str().ok_or("id: not a string")?.to_string();
    let mut paths = Vec::new();
    for name in ["image", "mask"] {
        let rel = field(name)?.as_str().ok_or_else(|| format!("{name}: not a string"))?;
        let path = root.join(rel);
        image::image_dimensions(&path).map_err(|e| format!("{name}: unreadable {}: {e}", path.display()))?;
        paths.push(path);
    }
    let pose: CameraPose = serde_json::from_value(field("pose")?.clone()).map_err(|e| format!("pose: {e}"))?;
    pose.validate().map_err(|e| format!("pose: {e}"))?;
    let coeffs: SemanticCode = serde_json::from_value(field("coeffs")?.clone()).map_err(|e| format!("coeffs: {e}"))?;
    coeffs.validate(dims).map_err(|e| format!("coeffs: {e}"))?;
    let mask_path = paths.pop().expect("two paths");
    let image_path = paths.pop().expect("two paths");
    Ok(DatasetRecord { id, image_path, mask_path, pose, coeffs })
}

/// Reads `root/index.json`, validating every entry against `dims`.
/// Invalid entries are collected in [`Dataset::rejected`].
pub fn load_dataset(root: &Path, dims: &CodeDims) -> Result<Dataset> {
    let index = root.join(INDEX_FILE);
    let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    let entries: Vec<serde_json::Value> = serde_json::from_str(&text)?;
    let mut records = Vec::with_capacity(entries.len());
    let mut rejected = Vec::new();
    for (i, raw) in entries.iter().enumerate() {
        match check_entry(root, raw, dims) {
            Ok(r) => records.push(r),
            Err(reason) => rejected.push(Rejected {
                index: i,
                id: raw.get("id").and_then(|v| v.as_str()).map(str::to_string),
                reason,
            }),
        }
    }
    log::info!("dataset {}: {} records, {} rejected", root.display(), records.len(), rejected.len());
    Ok(Dataset { root: root.to_path_buf(), records, rejected })
}

pub fn write_index(root: &Path, entries: &[IndexEntry]) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let path = root.join(INDEX_FILE);
    let text = serde_json::to_string_pretty(entries)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
