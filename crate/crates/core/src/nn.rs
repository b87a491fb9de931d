//! Parameterized layers shared by the generator, encoder and discriminator.

use morpheus_tensor::{Binding, ParamId, ParamStore, Tensor, Var};
use rand::Rng;

pub const LEAKY_SLOPE: f32 = 0.2;
/// Output gain after LeakyReLU in the render blocks, keeping activations
/// near unit scale through stacked demodulated layers.
pub const ACT_GAIN: f32 = std::f32::consts::SQRT_2;

/// Activation that follows a layer; selects the init gain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    LeakyRelu,
}

impl Activation {
    /// Uniform init bound giving unit forward gain for this activation.
    fn bound(self, fan_in: usize) -> f32 {
        let gain2 = match self {
            Activation::Linear => 1.0,
            Activation::LeakyRelu => 2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE),
        };
        (3.0 * gain2 / fan_in as f32).sqrt()
    }
}

pub fn uniform(rng: &mut impl Rng, shape: Vec<usize>, bound: f32) -> Tensor<f32> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-bound..=bound)).collect())
}

/// `y = x W^T + b` with `W: [out, in]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        act: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let w = uniform(rng, vec![out_dim, in_dim], act.bound(in_dim));
        Self::with_weight(store, name, w, Tensor::zeros(vec![out_dim]))
    }

    pub fn with_weight(store: &mut ParamStore, name: &str, weight: Tensor<f32>, bias: Tensor<f32>) -> Self {
        let (out_dim, in_dim) = (weight.dim(0), weight.dim(1));
        assert_eq!(bias.shape(), &[out_dim]);
        Self {
            weight: store.insert(format!("{name}.weight"), weight),
            bias: store.insert(format!("{name}.bias"), bias),
            in_dim,
            out_dim,
        }
    }

    /// `x: [n, in] -> [n, out]`.
    pub fn forward<'g>(&self, b: &Binding<'g>, x: Var<'g>) -> Var<'g> {
        x.matmul_t(b.var(self.weight)).add(b.var(self.bias))
    }

    /// Per-pixel application to an `[h, w, in]` image.
    pub fn forward_image<'g>(&self, b: &Binding<'g>, x: Var<'g>) -> Var<'g> {
        let (h, w) = (x.dim(0), x.dim(1));
        self.forward(b, x.reshape(vec![h * w, self.in_dim])).reshape(vec![h, w, self.out_dim])
    }
}

/// Square convolution on `[h, w, c]` images with bias.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        act: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = act.bound(kernel * kernel * in_ch);
        Self {
            weight: store.insert(format!("{name}.weight"), uniform(rng, vec![kernel, kernel, in_ch, out_ch], bound)),
            bias: store.insert(format!("{name}.bias"), Tensor::zeros(vec![out_ch])),
            kernel,
            stride,
            pad,
        }
    }

    /// Pre-activation output.
    pub fn forward<'g>(&self, b: &Binding<'g>, x: Var<'g>) -> Var<'g> {
        x.conv2d(b.var(self.weight), self.stride, self.pad).add(b.var(self.bias))
    }
}

/// 1x1 style-modulated layer with optional weight demodulation.
#[derive(Clone, Debug)]
pub struct ModulatedLayer {
    pub weight: ParamId,
    pub affine: Linear,
    pub bias: ParamId,
    pub demodulate: bool,
    pub eps: f32,
    pub in_ch: usize,
    pub out_ch: usize,
}

impl ModulatedLayer {
    /// `weight_bound` sets the uniform init range of the `[out, in]` weight.
    /// The style affine draws weights from U(±1/sqrt(cond)) with bias 1.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        cond_dim: usize,
        weight_bound: f32,
        eps: f32,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.insert(format!("{name}.weight"), uniform(rng, vec![out_ch, in_ch], weight_bound));
        let aw = uniform(rng, vec![in_ch, cond_dim], (1.0 / cond_dim as f32).sqrt());
        let affine = Linear::with_weight(store, &format!("{name}.affine"), aw, Tensor::ones(vec![in_ch]));
        let bias = store.insert(format!("{name}.bias"), Tensor::zeros(vec![out_ch]));
        Self { weight, affine, bias, demodulate: true, eps, in_ch, out_ch }
    }

    /// Style scales `s = affine(cond)`, shape `[1, in]`.
    pub fn styles<'g>(&self, b: &Binding<'g>, cond: Var<'g>) -> Var<'g> {
        self.affine.forward(b, cond)
    }

    /// Modulated (and demodulated) weight `[out, in]` for given styles.
    pub fn modulated_weight<'g>(&self, b: &Binding<'g>, styles: Var<'g>) -> Var<'g> {
        let w = b.var(self.weight).mul(styles);
        if !self.demodulate {
            return w;
        }
        let norm = w.square().sum_axis(1, true).add_scalar(self.eps).rsqrt();
        w.mul(norm)
    }

    /// Pre-bias response `x w''^T` for `x: [n, in]`.
    pub fn forward_pre_bias<'g>(&self, b: &Binding<'g>, x: Var<'g>, styles: Var<'g>) -> Var<'g> {
        x.matmul_t(self.modulated_weight(b, styles))
    }

    /// `w'' x + b` before the activation.
    pub fn forward<'g>(&self, b: &Binding<'g>, x: Var<'g>, cond: Var<'g>) -> Var<'g> {
        let s = self.styles(b, cond);
        self.forward_pre_bias(b, x, s).add(b.var(self.bias))
    }
}
