//! Discrete volume rendering of per-ray features.
//!
//! For samples `i = 1..N` with densities `sigma_i` and spacings `delta_i`
//! (`i < N`): `alpha_i = 1 - exp(-sigma_i delta_i)`, `t_1 = 1`,
//! `t_i = exp(-sum_{j<i} sigma_j delta_j)`, and the pixel is
//! `sum_{i=1}^{N-1} t_i alpha_i r_i`. The last sample contributes only
//! through `t_N`.

use morpheus_tensor::{Binding, Real, Tensor, Var};

use crate::camera::RayBundle;
use crate::error::{Error, Result};
use crate::neural_field::{positional_encode, RadianceField};

fn check_ray<T: Real>(sigma: &[T], delta: &[T]) -> Result<()> {
    if sigma.len() < 2 || delta.len() + 1 != sigma.len() {
        return Err(Error::arg("delta", format!("need N >= 2 densities and N-1 spacings, got {} and {}", sigma.len(), delta.len())));
    }
    if sigma.iter().any(|&s| !(s >= T::zero())) {
        return Err(Error::arg("sigma", "densities must be non-negative"));
    }
    if delta.iter().any(|&d| !(d > T::zero())) {
        return Err(Error::arg("delta", "spacings must be positive"));
    }
    Ok(())
}

/// Transmittance `t_1..t_N` of one ray.
pub fn transmittance<T: Real>(sigma: &[T], delta: &[T]) -> Result<Vec<T>> {
    check_ray(sigma, delta)?;
    let mut t = Vec::with_capacity(sigma.len());
    t.push(T::one());
    let mut acc = T::zero();
    for (s, d) in sigma.iter().zip(delta) {
        acc = acc + *s * *d;
        t.push((-acc).exp());
    }
    Ok(t)
}

/// Opacities `alpha_1..alpha_{N-1}` of one ray.
pub fn alpha<T: Real>(sigma: &[T], delta: &[T]) -> Result<Vec<T>> {
    check_ray(sigma, delta)?;
    Ok(sigma.iter().zip(delta).map(|(&s, &d)| -(-(s * d)).exp_m1()).collect())
}

/// Composited feature of one ray; `r` is `N x d_f` row-major.
pub fn composite<T: Real>(t: &[T], alpha: &[T], r: &[T], d_f: usize) -> Result<Vec<T>> {
    let n = t.len();
    if alpha.len() + 1 != n || r.len() != n * d_f {
        return Err(Error::arg("r", format!("inconsistent lengths t={n} alpha={} r={}", alpha.len(), r.len())));
    }
    let mut out = vec![T::zero(); d_f];
    for i in 0..n - 1 {
        let w = t[i] * alpha[i];
        for (o, &v) in out.iter_mut().zip(&r[i * d_f..(i + 1) * d_f]) {
            *o = *o + w * v;
        }
    }
    Ok(out)
}

/// Batched rendering results.
pub struct RenderedRays<'g, T: Real> {
    /// `[rays, d_f]`
    pub pixels: Var<'g, T>,
    /// Compositing weights `t_i alpha_i`, `[rays, N-1]`.
    pub weights: Var<'g, T>,
}

/// Renders `rays` at once from `sigma: [R, N]`, `deltas: [R, N-1]` and
/// `features: [R, N, d_f]`.
pub fn render_rays<'g, T: Real>(sigma: Var<'g, T>, deltas: &Tensor<T>, features: Var<'g, T>) -> RenderedRays<'g, T> {
    let (rays, n) = (sigma.dim(0), sigma.dim(1));
    assert_eq!(deltas.shape(), &[rays, n - 1], "deltas shape");
    let d_f = features.dim(2);
    let sd = sigma.narrow(1, 0, n - 1).mul_const(deltas);
    let exclusive = sd.cumsum(1).sub(sd);
    let t = exclusive.neg().exp();
    let a = sd.neg().exp().neg().add_scalar(T::one());
    let weights = t.mul(a);
    let pixels = weights
        .reshape(vec![rays, n - 1, 1])
        .mul(features.narrow(1, 0, n - 1))
        .sum_axis(1, false);
    debug_assert_eq!(pixels.shape(), vec![rays, d_f]);
    RenderedRays { pixels, weights }
}

/// Low-resolution feature map `[g, g, d_f]` and the raw field outputs.
pub struct FeatureMap<'g> {
    pub map: Var<'g>,
    /// `[rays, N]`
    pub sigma: Var<'g>,
    /// `[rays, N, d_f]`
    pub features: Var<'g>,
}

pub fn render_feature_map<'g>(
    b: &Binding<'g>,
    bundle: &RayBundle,
    field: &RadianceField,
    shape_cond: Var<'g>,
) -> FeatureMap<'g> {
    let g = b.graph();
    let (rays, n) = (bundle.num_rays(), bundle.n_samples);
    let grid = (rays as f64).sqrt().round() as usize;
    assert_eq!(grid * grid, rays, "bundle must cover a square grid");
    let enc = g.constant(positional_encode::<f32>(&bundle.sample_points(), field.octaves, true));
    let out = field.forward(b, enc, shape_cond);
    let d_f = field.feature_dim();
    let sigma = out.sigma.reshape(vec![rays, n]);
    let features = out.features.reshape(vec![rays, n, d_f]);
    let deltas = Tensor::new(vec![rays, n - 1], bundle.deltas.iter().map(|&d| d as f32).collect());
    let rendered = render_rays(sigma, &deltas, features);
    FeatureMap { map: rendered.pixels.reshape(vec![grid, grid, d_f]), sigma, features }
}
