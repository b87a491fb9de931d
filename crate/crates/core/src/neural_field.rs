//! Positional encoding and the style-modulated sine radiance field.

use morpheus_tensor::{Binding, ParamStore, Real, Tensor, Var};
use rand::Rng;

use crate::camera::Vec3;
use crate::config::ModelConfig;
use crate::nn::{Activation, Linear, ModulatedLayer};

/// Per axis `[x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)]`,
/// axes concatenated in x, y, z order. Output `[points, 3 (2L + 1)]`, or
/// `[points, 6L]` without the raw coordinates.
pub fn positional_encode<T: Real>(points: &[Vec3], octaves: usize, include_input: bool) -> Tensor<T> {
    let per_axis = 2 * octaves + usize::from(include_input);
    let mut out = Vec::with_capacity(points.len() * 3 * per_axis);
    for p in points {
        for &x in p {
            if include_input {
                out.push(T::lit(x));
            }
            for k in 0..octaves {
                let a = (1u64 << k) as f64 * std::f64::consts::PI * x;
                out.push(T::lit(a.sin()));
                out.push(T::lit(a.cos()));
            }
        }
    }
    Tensor::new(vec![points.len(), 3 * per_axis], out)
}

#[derive(Clone, Debug)]
pub struct RadianceField {
    pub layers: Vec<ModulatedLayer>,
    pub density_head: Linear,
    pub feature_head: Linear,
    pub omega_first: f32,
    pub omega_hidden: f32,
    pub octaves: usize,
}

/// Densities `[points]` (non-negative) and features `[points, d_f]`.
pub struct FieldOutput<'g> {
    pub sigma: Var<'g>,
    pub features: Var<'g>,
}

impl RadianceField {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let cond = cfg.codes.id + cfg.codes.expr;
        let mut layers = Vec::with_capacity(cfg.field_layers);
        for i in 0..cfg.field_layers {
            let (fan_in, omega) = if i == 0 {
                (cfg.pe_dim(), cfg.omega_first)
            } else {
                (cfg.field_width, cfg.omega_hidden)
            };
            let bound = (6.0 / fan_in as f32).sqrt() / omega.max(1.0);
            layers.push(ModulatedLayer::new(
                store,
                &format!("field.layer{i}"),
                fan_in,
                cfg.field_width,
                cond,
                bound,
                cfg.demod_eps,
                rng,
            ));
        }
        let density_head =
            Linear::new(store, "field.density_head", cfg.field_width, 1, Activation::Linear, rng);
        let feature_head =
            Linear::new(store, "field.feature_head", cfg.field_width, cfg.feature_dim, Activation::Linear, rng);
        Self {
            layers,
            density_head,
            feature_head,
            omega_first: cfg.omega_first,
            omega_hidden: cfg.omega_hidden,
            octaves: cfg.pe_octaves,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_head.out_dim
    }

    /// Evaluates the field on encoded points `[P, d_p]` under the shape
    /// condition `[1, dim(id) + dim(expr)]`.
    pub fn forward<'g>(&self, b: &Binding<'g>, encoded: Var<'g>, shape_cond: Var<'g>) -> FieldOutput<'g> {
        let mut h = encoded;
        for (i, layer) in self.layers.iter().enumerate() {
            let omega = if i == 0 { self.omega_first } else { self.omega_hidden };
            h = layer.forward(b, h, shape_cond).sin_scaled(omega);
        }
        let p = h.dim(0);
        let sigma = self.density_head.forward(b, h).softplus().reshape(vec![p]);
        let features = self.feature_head.forward(b, h);
        FieldOutput { sigma, features }
    }
}
