//! Architecture presets. `paper()` is the full 512px model, `toy()` the
//! desk-scale model used by tests and the quick-start.

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::codes::CodeDims;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: String,
    pub codes: CodeDims,
    /// Hidden layers per mapping network (each of width = group dim).
    pub mapping_hidden_layers: usize,
    pub pe_octaves: usize,
    pub field_layers: usize,
    pub field_width: usize,
    pub feature_dim: usize,
    /// Sine frequency of the first field layer. Demodulation fixes each
    /// weight row to unit norm, so this is the frequency relative to
    /// unit-norm rows.
    pub omega_first: f32,
    /// Sine frequency of the remaining field layers.
    pub omega_hidden: f32,
    pub demod_eps: f32,
    pub camera: CameraIntrinsics,
    /// Distance of the canonical camera from the scene origin.
    pub camera_radius: f64,
    /// Samples per ray at inference.
    pub n_samples: usize,
    /// Output channels of each render block; its length is the block count.
    pub block_channels: Vec<usize>,
    pub seg_channels: usize,
    pub encoder_channels: Vec<usize>,
    pub encoder_head_hidden: usize,
    pub disc_channels: Vec<usize>,
}

/// Channel widths halving from `feature_dim` per block, floored at 32.
fn halving_channels(feature_dim: usize, blocks: usize) -> Vec<usize> {
    (1..=blocks).map(|i| (feature_dim >> i).max(32)).collect()
}

impl ModelConfig {
    pub fn paper() -> Self {
        Self {
            preset: "paper".into(),
            codes: CodeDims { id: 100, expr: 79, tex: 100, light: 27 },
            mapping_hidden_layers: 2,
            pe_octaves: 6,
            field_layers: 4,
            field_width: 256,
            feature_dim: 256,
            omega_first: 3.0,
            omega_hidden: 1.0,
            demod_eps: 1e-8,
            camera: CameraIntrinsics::default(),
            camera_radius: 2.7,
            n_samples: 32,
            block_channels: halving_channels(256, 4),
            seg_channels: 32,
            encoder_channels: vec![32, 64, 128, 256, 512, 512, 512],
            encoder_head_hidden: 128,
            disc_channels: vec![32, 64, 128, 256, 512, 512, 512, 512],
        }
    }

    /// NeRF 16x16, 32 feature channels, two render blocks up to 64x64.
    pub fn toy() -> Self {
        Self {
            preset: "toy".into(),
            codes: CodeDims { id: 16, expr: 8, tex: 16, light: 6 },
            mapping_hidden_layers: 2,
            pe_octaves: 6,
            field_layers: 2,
            field_width: 64,
            feature_dim: 32,
            omega_first: 3.0,
            omega_hidden: 1.0,
            demod_eps: 1e-8,
            camera: CameraIntrinsics { grid_res: 16, ..CameraIntrinsics::default() },
            camera_radius: 2.7,
            n_samples: 32,
            block_channels: halving_channels(32, 2),
            seg_channels: 8,
            encoder_channels: vec![16, 32, 64, 128],
            encoder_head_hidden: 128,
            disc_channels: vec![32, 64, 128, 128, 128],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "toy" => Ok(Self::toy()),
            other => Err(Error::arg("preset", format!("unknown preset {other:?} (paper|toy)"))),
        }
    }

    pub fn final_res(&self) -> usize {
        self.camera.grid_res << self.block_channels.len()
    }

    /// Resolution produced by each render block, ascending.
    pub fn block_resolutions(&self) -> Vec<usize> {
        (1..=self.block_channels.len()).map(|i| self.camera.grid_res << i).collect()
    }

    pub fn pe_dim(&self) -> usize {
        3 * (2 * self.pe_octaves + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if self.codes.iter().any(|(_, &d)| d == 0) {
            return bad("codes", "group dims must be positive");
        }
        if self.field_layers == 0 || self.field_width == 0 || self.feature_dim == 0 {
            return bad("field", "layers, width and feature_dim must be positive");
        }
        if self.block_channels.is_empty() || self.block_channels.contains(&0) {
            return bad("block_channels", "need at least one block with positive width");
        }
        if self.n_samples < 2 {
            return bad("n_samples", "at least 2 samples per ray");
        }
        if self.encoder_channels.is_empty() || self.disc_channels.is_empty() {
            return bad("encoder_channels/disc_channels", "must be non-empty");
        }
        if self.final_res() >> self.encoder_channels.len() == 0 {
            return bad("encoder_channels", "too many strided layers for the image size");
        }
        if self.final_res() >> (self.disc_channels.len() - 1) == 0 {
            return bad("disc_channels", "too many strided layers for the image size");
        }
        if !(self.demod_eps >= 0.0) {
            return bad("demod_eps", "must be non-negative");
        }
        self.camera.validate()
    }
}
