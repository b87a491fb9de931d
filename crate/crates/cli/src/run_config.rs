//! Training run files: a few top-level keys plus a `[train]` section whose
//! keys are the trainer's hyperparameters. Keys left out keep the preset's
//! defaults.
//!
//! ```toml
//! preset = "toy"
//! dataset = "data/toy"
//! out = "runs/toy"
//!
//! [train]
//! epochs = 40
//! lr = 1e-3
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use stylemorpheus::trainer::TrainConfig;
use stylemorpheus::{Error, ModelConfig, Result};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default = "default_preset")]
    preset: String,
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    #[serde(default)]
    train: toml::Table,
}

fn default_preset() -> String {
    "toy".into()
}

/// Trainer defaults for a preset: the photometric weights follow its block
/// resolutions.
pub fn train_defaults(model: &ModelConfig) -> TrainConfig {
    if model.preset == "toy" {
        TrainConfig::toy()
    } else {
        TrainConfig::default()
    }
}

/// Overlays `over` onto `base`, recursing into tables so a partial
/// `[train.weights]` keeps the unnamed weights.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    pub fn for_preset(preset: &str) -> Result<Self> {
        let model = ModelConfig::preset(preset)?;
        Ok(Self { train: train_defaults(&model), model, dataset: None, out: None })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawRun = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let model = ModelConfig::preset(&raw.preset)?;
        // Merged as JSON: the resolution weights are keyed by integers, which
        // TOML tables cannot hold directly.
        let mut merged = serde_json::to_value(train_defaults(&model))?;
        merge(&mut merged, serde_json::to_value(raw.train)?);
        let train: TrainConfig =
            serde_json::from_value(merged).map_err(|e| Error::Config(format!("train: {e}")))?;
        train.validate()?;
        Ok(Self { model, train, dataset: raw.dataset, out: raw.out })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
