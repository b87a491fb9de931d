//! Evaluation metrics on images stored in [-1, 1] and scored in [0, 1].

use morpheus_tensor::Tensor;

use crate::error::{Error, Result};

fn check(pred: &Tensor<f32>, target: &Tensor<f32>, mask: &Tensor<f32>) -> Result<f64> {
    let (h, w) = (target.dim(0), target.dim(1));
    if pred.shape() != target.shape() || mask.shape() != [h, w, 1] {
        return Err(Error::arg(
            "image",
            format!("prediction {:?}, target {:?}, mask {:?}", pred.shape(), target.shape(), mask.shape()),
        ));
    }
    let inside = mask.data().iter().filter(|&&m| m >= 0.5).count();
    if inside == 0 {
        return Err(Error::arg("mask", "mask is empty"));
    }
    Ok(inside as f64)
}

/// Per-value differences in [0, 1] units over pixels inside the mask.
fn masked_diffs<'a>(pred: &'a Tensor<f32>, target: &'a Tensor<f32>, mask: &'a Tensor<f32>) -> impl Iterator<Item = f64> + 'a {
    let c = target.dim(2);
    pred.data()
        .iter()
        .zip(target.data())
        .enumerate()
        .filter(move |(i, _)| mask.data()[i / c] >= 0.5)
        .map(|(_, (&p, &t))| (p.clamp(-1.0, 1.0) as f64 - t as f64) / 2.0)
}

/// Mean absolute error over the pixels and channels inside the mask.
pub fn masked_l1(pred: &Tensor<f32>, target: &Tensor<f32>, mask: &Tensor<f32>) -> Result<f64> {
    let n = check(pred, target, mask)? * target.dim(2) as f64;
    Ok(masked_diffs(pred, target, mask).map(f64::abs).sum::<f64>() / n)
}

pub fn masked_mse(pred: &Tensor<f32>, target: &Tensor<f32>, mask: &Tensor<f32>) -> Result<f64> {
    let n = check(pred, target, mask)? * target.dim(2) as f64;
    Ok(masked_diffs(pred, target, mask).map(|d| d * d).sum::<f64>() / n)
}

/// PSNR in dB with peak 1 over the pixels inside the mask; infinite for an
/// exact match.
pub fn masked_psnr(pred: &Tensor<f32>, target: &Tensor<f32>, mask: &Tensor<f32>) -> Result<f64> {
    let mse = masked_mse(pred, target, mask)?;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Mean RGB in [0, 1] over the pixels of `part`.
pub fn mean_part_color(image: &Tensor<f32>, part: &Tensor<f32>) -> Result<[f64; 3]> {
    let (h, w) = (image.dim(0), image.dim(1));
    if image.shape() != [h, w, 3] || part.shape() != [h, w, 1] {
        return Err(Error::arg("mask", format!("image {:?} vs part mask {:?}", image.shape(), part.shape())));
    }
    let mut sum = [0.0; 3];
    let mut n = 0.0;
    for (px, &m) in image.data().chunks_exact(3).zip(part.data()) {
        if m >= 0.5 {
            (0..3).for_each(|i| sum[i] += (px[i].clamp(-1.0, 1.0) as f64 + 1.0) / 2.0);
            n += 1.0;
        }
    }
    if n == 0.0 {
        return Err(Error::arg("mask", "part mask is empty"));
    }
    Ok(sum.map(|s| s / n))
}

pub fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}
