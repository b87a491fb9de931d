//! Code-offset fitting to a single image, style mixing, and part-color
//! editing. None of these modify model parameters.

use morpheus_tensor::{AdamConfig, AdamState, Binding, Graph, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::codes::{code_constants, mix_codes, Group, Groups, SemanticCode};
use crate::error::{Error, Result};
use crate::losses::{broadcast_mask, color_edit_losses, fitting_loss, reconstruction, Extractor, LossWeights, TargetPair};
use crate::metrics::{color_distance, masked_psnr, mean_part_color};
use crate::model::{Model, Rendered, Sampling};

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub steps: usize,
    pub lr: f64,
    /// Multiplicative learning-rate decay per step.
    pub lr_decay: f64,
    /// Weight of `sum_g ||dz_g||^2`.
    pub offset_weight: f64,
    pub weights: LossWeights,
    pub extractor: Extractor,
}

impl FitOptions {
    pub fn for_model(model: &Model) -> Self {
        Self {
            steps: 200,
            lr: 0.01,
            lr_decay: 0.99,
            offset_weight: 1.0,
            weights: LossWeights::for_resolutions(&model.config.block_resolutions()),
            extractor: Extractor::random_cnn(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Encoder output for the image.
    pub initial: SemanticCode,
    pub offset: SemanticCode,
    /// `initial + offset`.
    pub code: SemanticCode,
    pub pose: CameraPose,
    /// Fitting loss before each update; `trace[0]` is at zero offset.
    pub trace: Vec<f64>,
    pub best_loss: f64,
    pub best_step: usize,
}

/// Lifts offsets into the graph as trainable `[1, dim]` leaves.
fn offset_params<'g>(g: &'g Graph<f32>, dz: &SemanticCode) -> Groups<Var<'g>> {
    dz.map(|_, v| g.param(Tensor::from_slice(vec![1, v.len()], v)))
}

fn check_size(model: &Model, t: &Tensor<f32>, channels: usize, field: &str) -> Result<()> {
    let r = model.config.final_res();
    if t.shape() != [r, r, channels] {
        return Err(Error::arg(field, format!("expected [{r}, {r}, {channels}], got {:?}", t.shape())));
    }
    Ok(())
}

/// Optimizes per-group offsets `dz` so `G(E(I) + dz, pose)` reconstructs
/// the masked image, returning the best iterate. `progress(step, loss)` is
/// called after every evaluation.
pub fn fit_single_image(
    model: &Model,
    image: &Tensor<f32>,
    mask: &Tensor<f32>,
    pose: &CameraPose,
    opts: &FitOptions,
    mut progress: impl FnMut(usize, f64),
) -> Result<FitResult> {
    check_size(model, image, 3, "image")?;
    check_size(model, mask, 1, "mask")?;
    if !mask.data().iter().any(|&m| m >= 0.5) {
        return Err(Error::arg("mask", "mask selects no pixels"));
    }
    pose.validate()?;
    let levels = model.config.block_resolutions();
    let gammas: Vec<f32> =
        levels.iter().map(|&r| opts.weights.resolution_weight(r).map(|w| w as f32)).collect::<Result<_>>()?;
    let target = TargetPair::new(image.clone(), mask.clone(), &levels)?;
    let targets: Vec<Tensor<f32>> = target.levels.iter().map(|(_, t, _)| t.clone()).collect();
    let initial = model.encode(image)?;
    let mut dz = SemanticCode::zeros(&model.config.codes);
    let mut states = model.config.codes.map(|_, &d| AdamState::new(d));
    let adam = AdamConfig::default();
    let mut trace = Vec::with_capacity(opts.steps + 1);
    let (mut best_loss, mut best_step, mut best_dz) = (f64::INFINITY, 0, dz.clone());
    let mut lr = opts.lr;
    for step in 0..=opts.steps {
        let g = Graph::new();
        let b = Binding::frozen(&g, &model.store);
        let dzv = offset_params(&g, &dz);
        let z0 = code_constants(&g, &initial);
        let z = Groups::from_fn(|grp| z0.get(grp).add(*dzv.get(grp)));
        let w = model.map_vars(&b, &z);
        let out = model.decode_vars(&b, &w, pose, Sampling::eval(model.config.n_samples))?;
        let recon = reconstruction(
            &out.rgb,
            &targets,
            &gammas,
            &opts.extractor,
            opts.weights.photo as f32,
            opts.weights.perc as f32,
        )?;
        let loss = fitting_loss(recon, &dzv, opts.offset_weight as f32);
        let value = loss.item() as f64;
        trace.push(value);
        progress(step, value);
        if value < best_loss {
            (best_loss, best_step, best_dz) = (value, step, dz.clone());
        }
        if step == opts.steps {
            break;
        }
        let grads = g.backward(loss);
        for grp in Group::ALL {
            let grad = grads.get(*dzv.get(grp)).expect("offset used in loss");
            states.get_mut(grp).update(&adam, dz.get_mut(grp), grad.data(), lr);
        }
        lr *= opts.lr_decay;
    }
    Ok(FitResult {
        code: initial.apply_offset(&best_dz)?,
        initial,
        offset: best_dz,
        pose: *pose,
        trace,
        best_loss,
        best_step,
    })
}

/// Renders the code that takes `groups` from `target` and the rest from `source`.
pub fn style_mix_render(
    model: &Model,
    source: &SemanticCode,
    target: &SemanticCode,
    groups: &[Group],
    pose: &CameraPose,
) -> Result<Rendered> {
    source.validate(&model.config.codes)?;
    model.render(&mix_codes(source, target, groups)?, pose)
}

#[derive(Clone, Debug)]
pub struct ColorEditRequest {
    pub code: SemanticCode,
    pub pose: CameraPose,
    /// Binary `[H, W, 1]` part mask at the output resolution.
    pub part: Tensor<f32>,
    /// Target RGB in [0, 1].
    pub color: [f64; 3],
    pub steps: usize,
    pub lr: f64,
    pub reg_weight: f64,
}

impl ColorEditRequest {
    pub fn new(code: SemanticCode, pose: CameraPose, part: Tensor<f32>, color: [f64; 3]) -> Self {
        Self { code, pose, part, color, steps: 100, lr: 0.01, reg_weight: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColorEditResult {
    pub offset_tex: Vec<f32>,
    /// Edited code; only the texture group differs from the request.
    pub code: SemanticCode,
    /// Objective before each update.
    pub trace: Vec<f64>,
    /// Mean part color distance to the target before each update.
    pub color_distance: Vec<f64>,
    pub best_step: usize,
    #[serde(skip)]
    pub image: Tensor<f32>,
}

/// Optimizes a texture-code offset so the part's mean color moves to the
/// target while the rest of the image stays put.
pub fn edit_part_color(
    model: &Model,
    req: &ColorEditRequest,
    mut progress: impl FnMut(usize, f64),
) -> Result<ColorEditResult> {
    req.code.validate(&model.config.codes)?;
    req.pose.validate()?;
    check_size(model, &req.part, 1, "mask")?;
    if req.part.data().iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(Error::arg("mask", "part mask must be binary"));
    }
    if req.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::arg("color", "components must be in [0, 1]"));
    }
    let sampling = Sampling::eval(model.config.n_samples);
    let base = {
        let g = Graph::new();
        let b = Binding::frozen(&g, &model.store);
        let w = model.map_vars(&b, &code_constants(&g, &req.code));
        model.decode_vars(&b, &w, &req.pose, sampling)?.final_rgb().value().as_ref().clone()
    };
    let target = Tensor::new(
        base.shape().to_vec(),
        (0..base.len()).map(|i| (req.color[i % 3] * 2.0 - 1.0) as f32).collect(),
    );
    let dims = model.config.codes.tex;
    let mut dz = vec![0.0f32; dims];
    let mut state = AdamState::new(dims);
    let adam = AdamConfig::default();
    let mut trace = Vec::with_capacity(req.steps + 1);
    let mut distances = Vec::with_capacity(req.steps + 1);
    let (mut best, mut best_step, mut best_dz, mut best_image) = (f64::INFINITY, 0, dz.clone(), base.clone());
    for step in 0..=req.steps {
        let g = Graph::new();
        let b = Binding::frozen(&g, &model.store);
        let dzv = g.param(Tensor::from_slice(vec![1, dims], &dz));
        let mut z = code_constants(&g, &req.code);
        z.tex = z.tex.add(dzv);
        let w = model.map_vars(&b, &z);
        let edited = model.decode_vars(&b, &w, &req.pose, sampling)?.final_rgb();
        let (color, rest, reg) = color_edit_losses(edited, &base, &target, &req.part, dzv)?;
        let loss = color.add(rest).add(reg.scale(req.reg_weight as f32));
        let value = loss.item() as f64;
        let image = edited.value().as_ref().clone();
        trace.push(value);
        distances.push(color_distance(mean_part_color(&image, &req.part)?, req.color));
        progress(step, value);
        if value < best {
            (best, best_step, best_dz, best_image) = (value, step, dz.clone(), image);
        }
        if step == req.steps {
            break;
        }
        let grads = g.backward(loss);
        state.update(&adam, &mut dz, grads.get(dzv).expect("offset used").data(), req.lr);
    }
    let mut code = req.code.clone();
    code.tex.iter_mut().zip(&best_dz).for_each(|(a, b)| *a += b);
    Ok(ColorEditResult {
        offset_tex: best_dz,
        code,
        trace,
        color_distance: distances,
        best_step,
        image: best_image.map(|v| v.clamp(-1.0, 1.0)),
    })
}

/// `image` with pixels outside `mask` set to zero (mid-grey).
pub fn masked_image(image: &Tensor<f32>, mask: &Tensor<f32>) -> Tensor<f32> {
    broadcast_mask(image, mask)
}

/// Masked PSNR of `G(E(I), pose)` against `I`: the encoder's code rendered
/// at the image's own pose.
pub fn reconstruction_psnr(model: &Model, image: &Tensor<f32>, mask: &Tensor<f32>, pose: &CameraPose) -> Result<f64> {
    let z = model.encode(image)?;
    let out = model.render(&z, pose)?;
    masked_psnr(&out.rgb, image, mask)
}
