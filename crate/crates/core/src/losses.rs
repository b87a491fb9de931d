//! Training, fitting and editing objectives. Everything is generic over the
//! scalar type so the same code runs in `f64` for gradient checks.

use std::collections::BTreeMap;

use morpheus_tensor::{Graph, Real, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::Groups;
use crate::error::{Error, Result};
use crate::imaging::resize_bicubic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Photometric weight per image resolution.
    pub resolution: BTreeMap<usize, f64>,
    pub code: Groups<f64>,
    pub photo: f64,
    pub perc: f64,
    pub seg: f64,
    pub adv: f64,
    pub r1_gamma: f64,
}

impl LossWeights {
    pub fn paper() -> Self {
        Self {
            resolution: [(64, 0.01), (128, 0.1), (256, 0.5), (512, 1.0)].into_iter().collect(),
            code: Groups { id: 0.001, expr: 0.1, tex: 0.001, light: 0.01 },
            photo: 1.0,
            perc: 0.1,
            seg: 0.01,
            adv: 0.1,
            r1_gamma: 10.0,
        }
    }

    /// Same terms with the resolution weights moved to the toy block sizes.
    pub fn toy() -> Self {
        Self::for_resolutions(&[32, 64])
    }

    /// Full-preset weights with the resolution weights re-keyed onto `res`
    /// (ascending), aligned at the final resolution. Blocks below the four
    /// weighted ones reuse the smallest weight.
    pub fn for_resolutions(res: &[usize]) -> Self {
        const PATTERN: [f64; 4] = [0.01, 0.1, 0.5, 1.0];
        let n = res.len();
        let resolution = res
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, PATTERN[(PATTERN.len() + i).saturating_sub(n).min(3)]))
            .collect();
        Self { resolution, ..Self::paper() }
    }

    pub fn resolution_weight(&self, res: usize) -> Result<f64> {
        self.resolution
            .get(&res)
            .copied()
            .ok_or_else(|| Error::Config(format!("no photometric weight for resolution {res}")))
    }
}

/// Ground truth image `[H, W, 3]` and binary mask `[H, W, 1]` with their
/// bicubic downscales to every render-block resolution.
#[derive(Clone, Debug)]
pub struct TargetPair {
    pub image: Tensor<f32>,
    pub mask: Tensor<f32>,
    /// `(res, M_res * I_res, M_res)`, ascending resolution.
    pub levels: Vec<(usize, Tensor<f32>, Tensor<f32>)>,
}

impl TargetPair {
    pub fn new(image: Tensor<f32>, mask: Tensor<f32>, resolutions: &[usize]) -> Result<Self> {
        let (h, w) = (image.dim(0), image.dim(1));
        if image.shape() != [h, w, 3] || mask.shape() != [h, w, 1] {
            return Err(Error::arg("mask", format!("image {:?} and mask {:?} disagree", image.shape(), mask.shape())));
        }
        let levels = resolutions
            .iter()
            .map(|&r| {
                let i = resize_bicubic(&image, r, r);
                let m = resize_bicubic(&mask, r, r);
                let masked = broadcast_mask(&i, &m);
                (r, masked, m)
            })
            .collect();
        Ok(Self { image, mask, levels })
    }

    pub fn masked_final(&self) -> &Tensor<f32> {
        &self.levels.last().expect("at least one level").1
    }
}

/// `image * mask` with a one-channel mask.
pub fn broadcast_mask<T: Real>(image: &Tensor<T>, mask: &Tensor<T>) -> Tensor<T> {
    let c = image.dim(2);
    let m = mask.data();
    let data = image.data().iter().enumerate().map(|(i, &v)| v * m[i / c]).collect();
    Tensor::new(image.shape().to_vec(), data)
}

/// `sum_res gamma_res * mean |pred_res - (M I)_res|`.
pub fn photometric_multires<'g, T: Real>(
    preds: &[Var<'g, T>],
    masked_targets: &[Tensor<T>],
    gammas: &[T],
) -> Result<Var<'g, T>> {
    if preds.len() != masked_targets.len() || preds.len() != gammas.len() || preds.is_empty() {
        return Err(Error::Config(format!(
            "photometric: {} predictions, {} targets, {} weights",
            preds.len(),
            masked_targets.len(),
            gammas.len()
        )));
    }
    let g = preds[0].graph();
    let mut total: Option<Var<'g, T>> = None;
    for ((p, t), &w) in preds.iter().zip(masked_targets).zip(gammas) {
        if p.shape() != t.shape() {
            return Err(Error::Config(format!("photometric: prediction {:?} vs target {:?}", p.shape(), t.shape())));
        }
        let term = p.sub(g.constant(t.clone())).abs().mean_all().scale(w);
        total = Some(match total {
            Some(a) => a.add(term),
            None => term,
        });
    }
    Ok(total.expect("non-empty"))
}

/// Feature extractor for the perceptual distance.
#[derive(Clone, Debug)]
pub enum Extractor {
    /// Raw pixels; the distance becomes the mean squared pixel difference.
    Identity,
    /// Fixed random 3x3 convolutions with LeakyReLU; every layer is a feature.
    RandomCnn(Vec<(Tensor<f32>, usize)>),
}

impl Extractor {
    /// Small seeded CNN: 3 -> 8 (stride 1) -> 16 (stride 2) -> 16 (stride 2).
    pub fn random_cnn(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = [(3, 8, 1), (8, 16, 2), (16, 16, 2)]
            .into_iter()
            .map(|(cin, cout, stride)| {
                let bound = (6.0 / (9 * cin) as f32).sqrt();
                let n = 9 * cin * cout;
                let w = Tensor::new(vec![3, 3, cin, cout], (0..n).map(|_| rng.random_range(-bound..=bound)).collect());
                (w, stride)
            })
            .collect();
        Extractor::RandomCnn(layers)
    }

    pub fn features<'g, T: Real>(&self, x: Var<'g, T>) -> Vec<Var<'g, T>> {
        match self {
            Extractor::Identity => vec![x],
            Extractor::RandomCnn(layers) => {
                let g = x.graph();
                let mut h = x;
                let mut out = Vec::with_capacity(layers.len());
                for (w, stride) in layers {
                    h = h.conv2d(g.constant(w.cast()), *stride, 1).leaky_relu(T::lit(0.2));
                    out.push(h);
                }
                out
            }
        }
    }
}

/// `sum_layers mean (phi(pred) - phi(target))^2`.
pub fn perceptual<'g, T: Real>(pred: Var<'g, T>, masked_target: &Tensor<T>, extractor: &Extractor) -> Var<'g, T> {
    let g = pred.graph();
    let target = g.constant(masked_target.clone());
    let fp = extractor.features(pred);
    let ft = extractor.features(target);
    fp.into_iter()
        .zip(ft)
        .map(|(a, b)| a.sub(b.detach()).square().mean_all())
        .reduce(|a, b| a.add(b))
        .expect("extractor yields at least one feature")
}

/// `lambda_photo L_photo + lambda_perc L_perc`.
pub fn reconstruction<'g, T: Real>(
    preds: &[Var<'g, T>],
    masked_targets: &[Tensor<T>],
    gammas: &[T],
    extractor: &Extractor,
    lambda_photo: T,
    lambda_perc: T,
) -> Result<Var<'g, T>> {
    let photo = photometric_multires(preds, masked_targets, gammas)?.scale(lambda_photo);
    if lambda_perc == T::zero() {
        return Ok(photo);
    }
    let last = preds.len() - 1;
    Ok(photo.add(perceptual(preds[last], &masked_targets[last], extractor).scale(lambda_perc)))
}

/// `sum_g lambda_g ||z_g - c_g||^2` over `[1, dim]` code rows.
pub fn code_regularization<'g, T: Real>(
    z: &Groups<Var<'g, T>>,
    c: &Groups<Tensor<T>>,
    lambda: &Groups<f64>,
) -> Result<Var<'g, T>> {
    let mut total: Option<Var<'g, T>> = None;
    for (grp, zv) in z.iter() {
        let cv = c.get(grp);
        if zv.len() != cv.len() {
            return Err(Error::arg(format!("coeffs.{grp}"), format!("expected {} values, got {}", zv.len(), cv.len())));
        }
        let target = zv.graph().constant(cv.clone().reshape(zv.shape()));
        let term = zv.sub(target).square().sum_all().scale(T::lit(*lambda.get(grp)));
        total = Some(match total {
            Some(a) => a.add(term),
            None => term,
        });
    }
    Ok(total.expect("four groups"))
}

/// Mean binary cross-entropy of mask logits against a `{0, 1}` mask.
pub fn segmentation_ce<'g, T: Real>(logits: Var<'g, T>, mask: &Tensor<T>) -> Result<Var<'g, T>> {
    if logits.shape() != mask.shape() {
        return Err(Error::arg("mask", format!("logits {:?} vs mask {:?}", logits.shape(), mask.shape())));
    }
    // softplus(x) - m x == -[m log s(x) + (1 - m) log(1 - s(x))]
    Ok(logits.softplus().sub(logits.mul_const(mask)).mean_all())
}

/// `softplus(D(fake)) + softplus(-D(real)) + r1`.
pub fn discriminator_loss<'g, T: Real>(d_real: Var<'g, T>, d_fake: Var<'g, T>, r1: Var<'g, T>) -> Var<'g, T> {
    d_fake.softplus().add(d_real.neg().softplus()).sum_all().add(r1.sum_all())
}

/// `softplus(-D(fake))`.
pub fn generator_adversarial_loss<'g, T: Real>(d_fake: Var<'g, T>) -> Var<'g, T> {
    d_fake.neg().softplus().sum_all()
}

/// `recon + weight * sum_g ||dz_g||^2`.
pub fn fitting_loss<'g, T: Real>(recon: Var<'g, T>, dz: &Groups<Var<'g, T>>, weight: T) -> Var<'g, T> {
    let reg = dz.iter().map(|(_, v)| v.square().sum_all()).reduce(|a, b| a.add(b)).expect("four groups");
    recon.add(reg.scale(weight))
}

/// Part-color editing terms `(L_color, L_rest, ||dz_tex||^2)`.
///
/// `edited` and `base` are `[H, W, 3]`, `target` holds the desired color
/// broadcast to the image, `part` is a binary `[H, W, 1]` mask. Norms of the
/// masks count pixels.
pub fn color_edit_losses<'g, T: Real>(
    edited: Var<'g, T>,
    base: &Tensor<T>,
    target: &Tensor<T>,
    part: &Tensor<T>,
    dz_tex: Var<'g, T>,
) -> Result<(Var<'g, T>, Var<'g, T>, Var<'g, T>)> {
    let area = part.sum();
    let rest_area = T::from_usize(part.len()).expect("count") - area;
    if !(area > T::zero()) {
        return Err(Error::arg("mask", "part mask is empty"));
    }
    if !(rest_area > T::zero()) {
        return Err(Error::arg("mask", "part mask covers the whole image"));
    }
    if edited.shape() != base.shape() || base.shape() != target.shape() {
        return Err(Error::arg("image", "edited, base and target shapes differ"));
    }
    let g: &'g Graph<T> = edited.graph();
    let inv = part.map(|m| T::one() - m);
    let to_rgb = |m: &Tensor<T>| broadcast_mask(&Tensor::ones(base.shape().to_vec()), m);
    let color = edited
        .sub(g.constant(target.clone()))
        .mul_const(&to_rgb(part))
        .square()
        .sum_all()
        .scale(T::one() / area);
    let rest = edited
        .sub(g.constant(base.clone()))
        .mul_const(&to_rgb(&inv))
        .square()
        .sum_all()
        .scale(T::one() / rest_area);
    Ok((color, rest, dz_tex.square().sum_all()))
}
