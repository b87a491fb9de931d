//! Convolutional image discriminator with an exactly differentiable R1
//! gradient penalty.
//!
//! The penalty needs `d/dtheta ||grad_x D(x)||^2`. Because every layer is
//! a convolution or dense map followed by a piecewise-linear activation, the
//! input gradient is a chain of transposed convolutions gated by the
//! activation slopes. The slopes are locally constant, so building that
//! chain as graph ops gives the exact parameter gradient of the penalty.

use morpheus_tensor::{Binding, ParamStore, Tensor, Var};
use rand::Rng;

use crate::nn::{Activation, Conv2d, Linear, LEAKY_SLOPE};

pub const DISC_PREFIX: &str = "disc.";

#[derive(Clone, Debug)]
pub struct Discriminator {
    /// 1x1 input layer followed by stride-2 3x3 layers.
    pub convs: Vec<Conv2d>,
    pub out: Linear,
    pub input_res: usize,
}

pub struct DiscPass<'g> {
    /// `[1, 1]`
    pub logit: Var<'g>,
    /// Pre-activation values and input sizes per convolution.
    layers: Vec<(Var<'g>, (usize, usize))>,
}

impl Discriminator {
    pub fn new(store: &mut ParamStore, channels: &[usize], input_res: usize, rng: &mut impl Rng) -> Self {
        let mut convs = Vec::with_capacity(channels.len());
        convs.push(Conv2d::new(store, "disc.from_rgb", 3, channels[0], 1, 1, 0, Activation::LeakyRelu, rng));
        for i in 1..channels.len() {
            let name = format!("disc.conv{i}");
            convs.push(Conv2d::new(store, &name, channels[i - 1], channels[i], 3, 2, 1, Activation::LeakyRelu, rng));
        }
        let side = input_res >> (channels.len() - 1);
        let flat = side * side * channels[channels.len() - 1];
        let out = Linear::new(store, "disc.out", flat, 1, Activation::Linear, rng);
        Self { convs, out, input_res }
    }

    pub fn forward<'g>(&self, b: &Binding<'g>, image: Var<'g>) -> DiscPass<'g> {
        let mut h = image;
        let mut layers = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let hw = (h.dim(0), h.dim(1));
            let pre = conv.forward(b, h);
            layers.push((pre, hw));
            h = pre.leaky_relu(LEAKY_SLOPE);
        }
        let logit = self.out.forward(b, h.reshape(vec![1, h.len()]));
        DiscPass { logit, layers }
    }

    /// `grad_x D(x)` as a differentiable function of the weights, for the
    /// input of `pass`.
    pub fn input_gradient<'g>(&self, b: &Binding<'g>, pass: &DiscPass<'g>) -> Var<'g> {
        let (last_pre, _) = pass.layers.last().expect("at least one layer");
        let mut g = b.var(self.out.weight).reshape(last_pre.shape());
        for (conv, (pre, hw)) in self.convs.iter().zip(&pass.layers).rev() {
            let slope = pre.value().map(|v| if v > 0.0 { 1.0 } else { LEAKY_SLOPE });
            g = g.mul_const(&slope).conv2d_transpose(b.var(conv.weight), *hw, conv.stride, conv.pad);
        }
        g
    }

    /// `(D(x), (gamma / 2) ||grad_x D(x)||^2)` for a real image.
    pub fn logit_and_r1<'g>(&self, b: &Binding<'g>, real: &Tensor<f32>, gamma: f32) -> (Var<'g>, Var<'g>) {
        let pass = self.forward(b, b.graph().constant(real.clone()));
        let grad = self.input_gradient(b, &pass);
        (pass.logit, grad.square().sum_all().scale(gamma / 2.0))
    }
}
