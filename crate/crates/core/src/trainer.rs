//! Two-stage training.
//!
//! Stage 1 trains encoder and generator end to end as an auto-encoder
//! (reconstruction + code regularization, plus segmentation once enabled),
//! with the encoder backbone frozen for the first epoch. Stage 2 fine-tunes
//! the generator adversarially against the discriminator with alternating
//! 1:1 updates, progressively from the first block at or above
//! `progressive_start_res`; the encoder is never touched.
//!
//! Every image is its own graph; gradients are accumulated across the
//! images of an optimizer step and scaled by the step's image count, so the
//! update equals the one from a single large batch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use morpheus_tensor::{Adam, AdamConfig, Binding, GradBuffer, Graph, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::{code_constants, Groups, SemanticCode};
use crate::data_io::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::data_io::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::{
    code_regularization, discriminator_loss, generator_adversarial_loss, reconstruction, segmentation_ce, Extractor,
    LossWeights, TargetPair,
};
use crate::model::{is_discriminator_param, is_generator_param, Model, Sampling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptualKind {
    Identity,
    RandomCnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stage: u8,
    pub epochs: usize,
    pub seed: u64,
    /// Reproducible data order and ray jitter.
    pub deterministic: bool,
    pub n_samples_stage1: usize,
    pub n_samples_stage2: usize,
    /// Images per micro-batch; `micro_batch * accumulation` per update.
    pub micro_batch: usize,
    pub accumulation: usize,
    pub lr: f64,
    /// Multiplicative stage-1 learning-rate decay per epoch.
    pub lr_decay: f64,
    pub freeze_backbone_epochs: usize,
    /// Segmentation loss on from the first step.
    pub seg_loss_enabled: bool,
    /// Switch the segmentation loss on at this epoch regardless of stability.
    pub seg_enable_epoch: Option<usize>,
    /// Relative change of the epoch-mean reconstruction loss below which an
    /// epoch counts as stable.
    pub seg_stability_tol: f64,
    pub seg_stability_epochs: usize,
    pub stratified: bool,
    pub perceptual: PerceptualKind,
    pub perceptual_seed: u64,
    pub weights: LossWeights,
    pub g_lr: f64,
    pub d_lr: f64,
    pub stage2_beta1: f64,
    pub stage2_beta2: f64,
    pub progressive_start_res: usize,
    /// D/G step pairs per stage-2 resolution.
    pub stage2_steps_per_res: usize,
    /// Overrides the resolution-dependent stage-2 batch size.
    pub stage2_batch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage: 1,
            epochs: 10,
            seed: 0,
            deterministic: true,
            n_samples_stage1: 32,
            n_samples_stage2: 64,
            micro_batch: 8,
            accumulation: 4,
            lr: 1e-4,
            lr_decay: 0.98,
            freeze_backbone_epochs: 1,
            seg_loss_enabled: false,
            seg_enable_epoch: None,
            seg_stability_tol: 0.02,
            seg_stability_epochs: 2,
            stratified: true,
            perceptual: PerceptualKind::RandomCnn,
            perceptual_seed: 0,
            weights: LossWeights::paper(),
            g_lr: 2e-3,
            d_lr: 1e-4,
            stage2_beta1: 0.0,
            stage2_beta2: 0.99,
            progressive_start_res: 64,
            stage2_steps_per_res: 100,
            stage2_batch: None,
        }
    }
}

impl TrainConfig {
    /// Toy-scale run: the photometric weights of the toy block resolutions
    /// and a larger step size, since the toy set is tiny and fast to revisit.
    pub fn toy() -> Self {
        Self {
            weights: LossWeights::toy(),
            lr: 1e-3,
            lr_decay: 0.99,
            micro_batch: 8,
            accumulation: 1,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, why: &str| Err(Error::Config(format!("{f}: {why}")));
        if !matches!(self.stage, 1 | 2) {
            return bad("stage", "must be 1 or 2");
        }
        if self.micro_batch == 0 || self.accumulation == 0 || self.stage2_batch == Some(0) {
            return bad("micro_batch/accumulation/stage2_batch", "batches must be positive");
        }
        for (f, v) in [("lr", self.lr), ("g_lr", self.g_lr), ("d_lr", self.d_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(f, "learning rates must be positive");
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", "must be in (0, 1]");
        }
        if self.n_samples_stage1 < 2 || self.n_samples_stage2 < 2 {
            return bad("n_samples", "at least 2 samples per ray");
        }
        Ok(())
    }

    pub fn effective_batch(&self) -> usize {
        self.micro_batch * self.accumulation
    }

    pub fn extractor(&self) -> Extractor {
        match self.perceptual {
            PerceptualKind::Identity => Extractor::Identity,
            PerceptualKind::RandomCnn => Extractor::random_cnn(self.perceptual_seed),
        }
    }
}

/// Stage-1 learning rate after `epoch` completed epochs.
pub fn lr_at_epoch(base: f64, decay: f64, epoch: usize) -> f64 {
    base * decay.powi(epoch as i32)
}

/// Stage-2 batch size for training at resolution `res`.
pub fn stage2_batch_size(res: usize) -> usize {
    match res {
        r if r < 256 => 32,
        r if r < 512 => 16,
        _ => 12,
    }
}

/// Ascending stage-2 resolutions: block resolutions from the first one at
/// or above `start` (the final resolution if none is).
pub fn stage2_schedule(block_res: &[usize], start: usize) -> Vec<usize> {
    let s: Vec<usize> = block_res.iter().copied().filter(|&r| r >= start).collect();
    if s.is_empty() {
        block_res.last().copied().into_iter().collect()
    } else {
        s
    }
}

/// Preloaded training example.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub id: String,
    pub pose: crate::camera::CameraPose,
    pub target: TargetPair,
    pub coeffs: Groups<Tensor<f32>>,
}

impl TrainSample {
    pub fn new(
        id: impl Into<String>,
        pose: crate::camera::CameraPose,
        image: Tensor<f32>,
        mask: Tensor<f32>,
        coeffs: &SemanticCode,
        resolutions: &[usize],
    ) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            pose,
            target: TargetPair::new(image, mask, resolutions)?,
            coeffs: coeffs.map(|_, v| Tensor::from_slice(vec![v.len()], v)),
        })
    }
}

/// Loads every record at the model's output resolution. Fails on any
/// rejected record so dimension problems surface before training.
pub fn prepare_samples(dataset: &Dataset, model: &Model) -> Result<Vec<TrainSample>> {
    dataset.require_clean()?;
    let res = model.config.final_res();
    let levels = model.config.block_resolutions();
    dataset
        .records
        .iter()
        .map(|r| {
            r.coeffs.validate(&model.config.codes).map_err(|e| Error::Record { record: r.id.clone(), reason: e.to_string() })?;
            let (image, mask) = r.load(res)?;
            TrainSample::new(r.id.clone(), r.pose, image, mask, &r.coeffs, &levels)
        })
        .collect()
}

/// Loss values of one optimizer step, averaged over its images.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub stage: u8,
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub loss_total: f64,
    pub recon: f64,
    pub code: f64,
    pub seg: f64,
    pub seg_enabled: bool,
    pub backbone_frozen: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdversarialLog {
    pub step: usize,
    pub res: usize,
    pub d_loss: f64,
    pub r1: f64,
    pub g_loss: f64,
    pub g_adv: f64,
    pub recon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub lr: f64,
    pub mean_recon: f64,
    pub mean_total: f64,
    pub seg_enabled: bool,
}

pub struct Trainer {
    pub model: Model,
    pub cfg: TrainConfig,
    extractor: Extractor,
    adam: Adam,
    adam_g: Adam,
    adam_d: Adam,
    /// Completed stage-1 epochs.
    pub epoch: usize,
    /// Optimizer steps taken.
    pub step: usize,
    pub seg_enabled: bool,
    pub stage1_done: bool,
    recon_history: Vec<f64>,
    out_dir: Option<PathBuf>,
    log: Option<BufWriter<File>>,
    pub history: Vec<StepLog>,
    pub adversarial_history: Vec<AdversarialLog>,
}

/// Stage-1 per-image loss terms.
struct Stage1Terms<'g> {
    total: Var<'g>,
    recon: f64,
    code: f64,
    seg: f64,
}

impl Trainer {
    pub fn new(model: Model, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        for r in model.config.block_resolutions() {
            cfg.weights.resolution_weight(r)?;
        }
        let stage2 = AdamConfig { beta1: cfg.stage2_beta1, beta2: cfg.stage2_beta2, ..AdamConfig::default() };
        Ok(Self {
            extractor: cfg.extractor(),
            seg_enabled: cfg.seg_loss_enabled,
            model,
            cfg,
            adam: Adam::new(AdamConfig::default()),
            adam_g: Adam::new(stage2),
            adam_d: Adam::new(stage2),
            epoch: 0,
            step: 0,
            stage1_done: false,
            recon_history: Vec::new(),
            out_dir: None,
            log: None,
            history: Vec::new(),
            adversarial_history: Vec::new(),
        })
    }

    /// Continues from checkpoint metadata. Optimizer moments start fresh.
    pub fn resume(model: Model, meta: &CheckpointMeta, cfg: TrainConfig) -> Result<Self> {
        let mut t = Self::new(model, cfg)?;
        t.epoch = meta.epoch;
        t.step = meta.step;
        t.seg_enabled |= meta.seg_enabled;
        t.stage1_done = meta.stage >= 1;
        Ok(t)
    }

    /// Writes checkpoints and `losses.jsonl` under `dir`.
    pub fn with_output(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("losses.jsonl");
        let f = File::options().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        self.log = Some(BufWriter::new(f));
        self.out_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    fn write_log(&mut self, value: &impl Serialize) -> Result<()> {
        if let Some(log) = &mut self.log {
            let line = serde_json::to_string(value)?;
            writeln!(log, "{line}").and_then(|_| log.flush()).map_err(|e| Error::io("losses.jsonl", e))?;
        }
        Ok(())
    }

    fn sampling(&self, n_samples: usize, salt: u64) -> Sampling {
        let seed = self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((self.step as u64) << 16) ^ salt;
        Sampling { n_samples, stratified: self.cfg.stratified, seed }
    }

    pub fn current_lr(&self) -> f64 {
        lr_at_epoch(self.cfg.lr, self.cfg.lr_decay, self.epoch)
    }

    fn gammas(&self, upto: usize) -> Result<Vec<f32>> {
        self.model.config.block_resolutions()[..upto]
            .iter()
            .map(|&r| self.cfg.weights.resolution_weight(r).map(|w| w as f32))
            .collect()
    }

    fn stage1_terms<'g>(&self, b: &Binding<'g>, s: &TrainSample, sampling: Sampling) -> Result<Stage1Terms<'g>> {
        let g = b.graph();
        let w = &self.cfg.weights;
        let z = self.model.encode_vars(b, g.constant(s.target.image.clone()));
        let ws = self.model.map_vars(b, &z);
        let out = self.model.decode_vars(b, &ws, &s.pose, sampling)?;
        let targets: Vec<Tensor<f32>> = s.target.levels.iter().map(|(_, t, _)| t.clone()).collect();
        let gammas = self.gammas(out.rgb.len())?;
        let recon = reconstruction(&out.rgb, &targets, &gammas, &self.extractor, w.photo as f32, w.perc as f32)?;
        let code = code_regularization(&z, &s.coeffs, &w.code)?;
        let seg = segmentation_ce(out.mask_logits, &s.target.mask)?;
        let mut total = recon.add(code);
        if self.seg_enabled {
            total = total.add(seg.scale(w.seg as f32));
        }
        Ok(Stage1Terms { total, recon: recon.item() as f64, code: code.item() as f64, seg: seg.item() as f64 })
    }

    /// Stage-1 objective of one sample, evaluated without sampling jitter.
    pub fn stage1_objective(&self, s: &TrainSample) -> Result<f64> {
        let g = Graph::new();
        let b = Binding::frozen(&g, &self.model.store);
        let t = self.stage1_terms(&b, s, Sampling::eval(self.cfg.n_samples_stage1))?;
        Ok(t.total.item() as f64)
    }

    /// One optimizer update over `batch`, processed in micro-batches.
    pub fn stage1_step(&mut self, batch: &[&TrainSample]) -> Result<StepLog> {
        if batch.is_empty() {
            return Err(Error::arg("batch", "empty batch"));
        }
        let frozen = self.epoch < self.cfg.freeze_backbone_epochs;
        self.model.set_backbone_frozen(frozen);
        let mut grads = GradBuffer::new(&self.model.store);
        let scale = 1.0 / batch.len() as f32;
        let mut acc = StepLog {
            stage: 1,
            epoch: self.epoch,
            step: self.step,
            lr: self.current_lr(),
            seg_enabled: self.seg_enabled,
            backbone_frozen: frozen,
            ..StepLog::default()
        };
        for (i, s) in batch.iter().enumerate() {
            let g = Graph::new();
            let model = &self.model;
            let b = Binding::with_trainable(&g, &model.store, |n| is_generator_param(n) || model.encoder_trainable(n));
            let terms = self.stage1_terms(&b, s, self.sampling(self.cfg.n_samples_stage1, i as u64))?;
            let total = terms.total.item() as f64;
            if !total.is_finite() {
                return Err(Error::Precondition(format!("non-finite stage-1 loss on record {}", s.id)));
            }
            let gr = g.backward(terms.total);
            b.accumulate_grads(&gr, &mut grads, scale);
            acc.loss_total += total / batch.len() as f64;
            acc.recon += terms.recon / batch.len() as f64;
            acc.code += terms.code / batch.len() as f64;
            acc.seg += terms.seg / batch.len() as f64;
        }
        let lr = acc.lr;
        let model = &mut self.model;
        let trainable: Vec<bool> =
            model.store.iter().map(|(_, n, _)| is_generator_param(n) || model.encoder_trainable(n)).collect();
        self.adam.step(&mut model.store, &grads, lr, |id| trainable[id.0]);
        self.step += 1;
        self.write_log(&acc)?;
        self.history.push(acc.clone());
        Ok(acc)
    }

    fn epoch_order(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        let seed = if self.cfg.deterministic { self.cfg.seed } else { rand::random() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (self.epoch as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        order.shuffle(&mut rng);
        order
    }

    /// Updates the segmentation switch from the epoch-mean reconstruction
    /// history and the explicit epoch flag.
    fn update_seg_switch(&mut self) {
        if self.seg_enabled {
            return;
        }
        if self.cfg.seg_enable_epoch.is_some_and(|e| self.epoch >= e) {
            self.seg_enabled = true;
            return;
        }
        let k = self.cfg.seg_stability_epochs;
        let h = &self.recon_history;
        if k > 0 && h.len() > k {
            let stable = h.windows(2).rev().take(k).all(|p| ((p[1] - p[0]) / p[0].abs().max(1e-12)).abs() < self.cfg.seg_stability_tol);
            if stable {
                log::info!("reconstruction loss stable; enabling segmentation loss at epoch {}", self.epoch);
                self.seg_enabled = true;
            }
        }
    }

    /// One pass over `samples` in seeded order.
    pub fn train_stage1_epoch(&mut self, samples: &[TrainSample]) -> Result<EpochSummary> {
        self.update_seg_switch();
        let order = self.epoch_order(samples.len());
        let lr = self.current_lr();
        let seg_enabled = self.seg_enabled;
        let (mut recon, mut total) = (0.0, 0.0);
        for chunk in order.chunks(self.cfg.effective_batch()) {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let log = self.stage1_step(&batch)?;
            recon += log.recon * chunk.len() as f64;
            total += log.loss_total * chunk.len() as f64;
        }
        let n = samples.len().max(1) as f64;
        let summary = EpochSummary { epoch: self.epoch, lr, mean_recon: recon / n, mean_total: total / n, seg_enabled };
        self.recon_history.push(summary.mean_recon);
        self.epoch += 1;
        self.stage1_done = true;
        if let Some(dir) = self.out_dir.clone() {
            let meta = self.meta(1);
            save_checkpoint(&self.model, &meta, &dir.join(format!("stage1_epoch{:03}", self.epoch)))?;
        }
        Ok(summary)
    }

    pub fn train_stage1(&mut self, samples: &[TrainSample], epochs: usize) -> Result<Vec<EpochSummary>> {
        if samples.is_empty() {
            return Err(Error::arg("dataset", "no training records"));
        }
        (0..epochs).map(|_| self.train_stage1_epoch(samples)).collect()
    }

    pub fn meta(&self, stage: u8) -> CheckpointMeta {
        CheckpointMeta { stage, epoch: self.epoch, step: self.step, seed: self.cfg.seed, seg_enabled: self.seg_enabled }
    }

    /// Real image for the discriminator at training resolution `res`,
    /// resized to the discriminator's input size.
    fn real_for_disc(&self, s: &TrainSample, res: usize) -> Tensor<f32> {
        let level = s.target.levels.iter().find(|(r, _, _)| *r == res).map(|(_, t, _)| t.clone());
        let img = level.unwrap_or_else(|| s.target.masked_final().clone());
        let d = self.model.disc.input_res;
        let g = Graph::new();
        g.constant(img).resize_bilinear(d, d).value().as_ref().clone()
    }

    fn block_index(&self, res: usize) -> Result<usize> {
        self.model
            .config
            .block_resolutions()
            .iter()
            .position(|&r| r == res)
            .ok_or_else(|| Error::Config(format!("no render block at resolution {res}")))
    }

    /// One discriminator update on `batch`; only discriminator parameters change.
    pub fn discriminator_step(&mut self, batch: &[(&TrainSample, &SemanticCode)], res: usize) -> Result<(f64, f64)> {
        let k = self.block_index(res)?;
        let d_res = self.model.disc.input_res;
        let gamma = self.cfg.weights.r1_gamma as f32;
        let mut grads = GradBuffer::new(&self.model.store);
        let scale = 1.0 / batch.len() as f32;
        let (mut d_total, mut r1_total) = (0.0, 0.0);
        for (i, (s, z)) in batch.iter().enumerate() {
            let g = Graph::new();
            let b = Binding::with_trainable(&g, &self.model.store, is_discriminator_param);
            let ws = self.model.map_vars(&b, &code_constants(&g, z));
            let out = self.model.decode_vars(&b, &ws, &s.pose, self.sampling(self.cfg.n_samples_stage2, i as u64))?;
            let fake = g.constant(out.rgb[k].value().as_ref().clone()).resize_bilinear(d_res, d_res);
            let d_fake = self.model.disc.forward(&b, fake).logit;
            let (d_real, r1) = self.model.disc.logit_and_r1(&b, &self.real_for_disc(s, res), gamma);
            let loss = discriminator_loss(d_real, d_fake, r1);
            d_total += loss.item() as f64 / batch.len() as f64;
            r1_total += r1.item() as f64 / batch.len() as f64;
            let gr = g.backward(loss);
            b.accumulate_grads(&gr, &mut grads, scale);
        }
        let store = &mut self.model.store;
        let is_d: Vec<bool> = store.iter().map(|(_, n, _)| is_discriminator_param(n)).collect();
        self.adam_d.step(store, &grads, self.cfg.d_lr, |id| is_d[id.0]);
        Ok((d_total, r1_total))
    }

    /// One generator update on `batch`; only generator parameters change.
    pub fn generator_step(&mut self, batch: &[(&TrainSample, &SemanticCode)], res: usize) -> Result<(f64, f64, f64)> {
        let k = self.block_index(res)?;
        let d_res = self.model.disc.input_res;
        let w = self.cfg.weights.clone();
        let gammas = self.gammas(k + 1)?;
        let mut grads = GradBuffer::new(&self.model.store);
        let scale = 1.0 / batch.len() as f32;
        let (mut total, mut adv_total, mut recon_total) = (0.0, 0.0, 0.0);
        for (i, (s, z)) in batch.iter().enumerate() {
            let g = Graph::new();
            let b = Binding::with_trainable(&g, &self.model.store, is_generator_param);
            let ws = self.model.map_vars(&b, &code_constants(&g, z));
            let out = self.model.decode_vars(&b, &ws, &s.pose, self.sampling(self.cfg.n_samples_stage2, 1000 + i as u64))?;
            let targets: Vec<Tensor<f32>> = s.target.levels[..=k].iter().map(|(_, t, _)| t.clone()).collect();
            let recon =
                reconstruction(&out.rgb[..=k], &targets, &gammas, &self.extractor, w.photo as f32, w.perc as f32)?;
            let d_fake = self.model.disc.forward(&b, out.rgb[k].resize_bilinear(d_res, d_res)).logit;
            let adv = generator_adversarial_loss(d_fake);
            let seg = segmentation_ce(out.mask_logits, &s.target.mask)?;
            let loss = recon.add(seg.scale(w.seg as f32)).add(adv.scale(w.adv as f32));
            total += loss.item() as f64 / batch.len() as f64;
            adv_total += adv.item() as f64 / batch.len() as f64;
            recon_total += recon.item() as f64 / batch.len() as f64;
            let gr = g.backward(loss);
            b.accumulate_grads(&gr, &mut grads, scale);
        }
        let store = &mut self.model.store;
        let is_g: Vec<bool> = store.iter().map(|(_, n, _)| is_generator_param(n)).collect();
        self.adam_g.step(store, &grads, self.cfg.g_lr, |id| is_g[id.0]);
        Ok((total, adv_total, recon_total))
    }

    /// Adversarial fine-tuning. Requires a completed stage 1.
    pub fn train_stage2(&mut self, samples: &[TrainSample]) -> Result<Vec<AdversarialLog>> {
        if !self.stage1_done {
            return Err(Error::Precondition("stage 2 needs a stage-1 checkpoint (use --resume)".into()));
        }
        if samples.is_empty() {
            return Err(Error::arg("dataset", "no training records"));
        }
        // The encoder is fixed in this stage, so its codes are computed once.
        let codes: Vec<SemanticCode> =
            samples.iter().map(|s| self.model.encode(&s.target.image)).collect::<Result<_>>()?;
        let schedule = stage2_schedule(&self.model.config.block_resolutions(), self.cfg.progressive_start_res);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5354_4147_4532);
        let mut logs = Vec::new();
        for res in schedule {
            let bs = self.cfg.stage2_batch.unwrap_or_else(|| stage2_batch_size(res)).min(samples.len());
            for _ in 0..self.cfg.stage2_steps_per_res {
                let mut pick: Vec<usize> = (0..samples.len()).collect();
                pick.shuffle(&mut rng);
                let batch: Vec<(&TrainSample, &SemanticCode)> =
                    pick[..bs].iter().map(|&i| (&samples[i], &codes[i])).collect();
                let (d_loss, r1) = self.discriminator_step(&batch, res)?;
                let (g_loss, g_adv, recon) = self.generator_step(&batch, res)?;
                let log = AdversarialLog { step: self.step, res, d_loss, r1, g_loss, g_adv, recon };
                if !(d_loss.is_finite() && g_loss.is_finite()) {
                    return Err(Error::Precondition(format!("non-finite adversarial loss at step {}", self.step)));
                }
                self.step += 1;
                self.write_log(&log)?;
                self.adversarial_history.push(log.clone());
                logs.push(log);
            }
            if let Some(dir) = self.out_dir.clone() {
                save_checkpoint(&self.model, &self.meta(2), &dir.join(format!("stage2_res{res}")))?;
            }
        }
        Ok(logs)
    }
}
