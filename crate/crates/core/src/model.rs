//! The assembled model: encoder E, mapping networks and style-based decoder
//! (together the generator G), and the discriminator D, sharing one
//! parameter store.

use morpheus_tensor::{Binding, Graph, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::camera::{generate_rays, CameraPose};
use crate::codes::{appearance_condition_var, code_constants, shape_condition_var, Groups, MappingNetworks, SemanticCode, StyleCode};
use crate::config::ModelConfig;
use crate::discriminator::{Discriminator, DISC_PREFIX};
use crate::encoder::{FaceEncoder, BACKBONE_PREFIX};
use crate::error::{Error, Result};
use crate::image_decoder::{RenderBlock, SegBranch};
use crate::neural_field::RadianceField;
use crate::volume_render::{render_feature_map, FeatureMap};

/// Parameters optimized as the generator: mapping networks and decoder.
pub fn is_generator_param(name: &str) -> bool {
    ["mapping.", "field.", "blocks.", "seg."].iter().any(|p| name.starts_with(p))
}

pub fn is_encoder_param(name: &str) -> bool {
    name.starts_with("encoder.")
}

pub fn is_discriminator_param(name: &str) -> bool {
    name.starts_with(DISC_PREFIX)
}

/// How rays are sampled for one decode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub n_samples: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl Sampling {
    pub fn eval(n_samples: usize) -> Self {
        Self { n_samples, stratified: false, seed: 0 }
    }
}

pub struct Decoded<'g> {
    /// One RGB image per render block, ascending resolution.
    pub rgb: Vec<Var<'g>>,
    pub block_features: Vec<Var<'g>>,
    /// `[H, W, 1]`
    pub mask_logits: Var<'g>,
    pub feature_map: FeatureMap<'g>,
}

impl<'g> Decoded<'g> {
    pub fn final_rgb(&self) -> Var<'g> {
        *self.rgb.last().expect("at least one block")
    }
}

/// Evaluation-mode render result.
#[derive(Clone, Debug)]
pub struct Rendered {
    /// Final image clamped to [-1, 1].
    pub rgb: Tensor<f32>,
    pub mask_logits: Tensor<f32>,
}

#[derive(Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub mapping: MappingNetworks,
    pub field: RadianceField,
    pub blocks: Vec<RenderBlock>,
    pub seg: SegBranch,
    pub encoder: FaceEncoder,
    pub disc: Discriminator,
    backbone_frozen: bool,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("preset", &self.config.preset)
            .field("params", &self.store.num_scalars())
            .finish_non_exhaustive()
    }
}

impl Model {
    /// Freshly initialized model; parameters are a pure function of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mapping = MappingNetworks::new(&mut store, &config.codes, config.mapping_hidden_layers, &mut rng);
        let field = RadianceField::new(&mut store, &config, &mut rng);
        let appearance = config.codes.tex + config.codes.light;
        let mut in_ch = config.feature_dim;
        let blocks = config
            .block_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let blk = RenderBlock::new(&mut store, i, in_ch, c, appearance, config.demod_eps, &mut rng);
                in_ch = c;
                blk
            })
            .collect();
        let seg = SegBranch::new(&mut store, &config.block_channels, config.seg_channels, &mut rng);
        let res = config.final_res();
        let encoder = FaceEncoder::new(
            &mut store,
            &config.encoder_channels,
            config.encoder_head_hidden,
            &config.codes,
            res,
            &mut rng,
        );
        let disc = Discriminator::new(&mut store, &config.disc_channels, res, &mut rng);
        Ok(Self { config, store, mapping, field, blocks, seg, encoder, disc, backbone_frozen: false })
    }

    /// Model whose parameters come from `store`; names and shapes must match
    /// the architecture of `config` exactly.
    pub fn with_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if store.len() != model.store.len() {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match the model's {}",
                store.len(),
                model.store.len()
            )));
        }
        for ((_, want_name, want), (_, name, have)) in model.store.iter().zip(store.iter()) {
            if want_name != name {
                return Err(Error::Checkpoint(format!("expected parameter {want_name}, found {name}")));
            }
            if want.shape() != have.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} vs expected {:?}",
                    have.shape(),
                    want.shape()
                )));
            }
        }
        model.store = store;
        Ok(model)
    }

    pub fn set_backbone_frozen(&mut self, frozen: bool) {
        self.backbone_frozen = frozen;
    }

    pub fn backbone_frozen(&self) -> bool {
        self.backbone_frozen
    }

    /// Whether the encoder parameter `name` takes part in optimization.
    pub fn encoder_trainable(&self, name: &str) -> bool {
        is_encoder_param(name) && !(self.backbone_frozen && name.starts_with(BACKBONE_PREFIX))
    }

    pub fn encode_vars<'g>(&self, b: &Binding<'g>, image: Var<'g>) -> Groups<Var<'g>> {
        self.encoder.forward(b, image)
    }

    pub fn map_vars<'g>(&self, b: &Binding<'g>, z: &Groups<Var<'g>>) -> Groups<Var<'g>> {
        self.mapping.forward(b, z)
    }

    /// Decoder pass from W-space code rows at `pose`.
    pub fn decode_vars<'g>(
        &self,
        b: &Binding<'g>,
        w: &Groups<Var<'g>>,
        pose: &CameraPose,
        sampling: Sampling,
    ) -> Result<Decoded<'g>> {
        let bundle = generate_rays(pose, &self.config.camera, sampling.n_samples, sampling.stratified, sampling.seed)?;
        let feature_map = render_feature_map(b, &bundle, &self.field, shape_condition_var(w));
        let appearance = appearance_condition_var(w);
        let mut x = feature_map.map;
        let mut rgb = Vec::with_capacity(self.blocks.len());
        let mut block_features = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let out = blk.forward(b, x, appearance);
            x = out.features;
            rgb.push(out.rgb);
            block_features.push(out.features);
        }
        let mask_logits = self.seg.forward(b, &block_features);
        Ok(Decoded { rgb, block_features, mask_logits, feature_map })
    }

    pub fn encode(&self, image: &Tensor<f32>) -> Result<SemanticCode> {
        self.encoder.encode(&self.store, image)
    }

    pub fn map_to_w(&self, z: &SemanticCode) -> Result<StyleCode> {
        self.mapping.map_to_w(&self.store, z)
    }

    /// `G(z, p)` in evaluation mode.
    pub fn render(&self, z: &SemanticCode, pose: &CameraPose) -> Result<Rendered> {
        z.validate(&self.config.codes)?;
        let g = Graph::new();
        let b = Binding::frozen(&g, &self.store);
        let w = self.map_vars(&b, &code_constants(&g, z));
        let out = self.decode_vars(&b, &w, pose, Sampling::eval(self.config.n_samples))?;
        Ok(Rendered {
            rgb: out.final_rgb().value().map(|v| v.clamp(-1.0, 1.0)),
            mask_logits: out.mask_logits.value().as_ref().clone(),
        })
    }

    /// SHA-256 over every parameter's name, shape and little-endian bytes.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (_, name, t) in self.store.iter() {
            h.update(name.as_bytes());
            for d in t.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Short human-readable summary for logs and the health endpoint.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "preset": self.config.preset,
            "codes": self.config.codes,
            "grid_res": self.config.camera.grid_res,
            "feature_dim": self.config.feature_dim,
            "image_res": self.config.final_res(),
            "parameters": self.store.num_scalars(),
        })
    }
}
