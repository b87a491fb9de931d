//! Image encoder: strided convolutional backbone, global average pooling,
//! and one two-layer head per semantic group.

use morpheus_tensor::{Binding, Graph, ParamStore, Tensor, Var};
use rand::Rng;

use crate::codes::{code_values, CodeDims, Groups, SemanticCode};
use crate::error::{Error, Result};
use crate::nn::{Activation, Conv2d, Linear, LEAKY_SLOPE};

/// Parameter-name prefix of the backbone.
pub const BACKBONE_PREFIX: &str = "encoder.backbone.";

#[derive(Clone, Debug)]
pub struct FaceEncoder {
    pub backbone: Vec<Conv2d>,
    pub heads: Groups<[Linear; 2]>,
    pub input_res: usize,
    pub feature_dim: usize,
}

impl FaceEncoder {
    pub fn new(
        store: &mut ParamStore,
        channels: &[usize],
        head_hidden: usize,
        dims: &CodeDims,
        input_res: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut in_ch = 3;
        let mut backbone = Vec::with_capacity(channels.len());
        for (i, &c) in channels.iter().enumerate() {
            let name = format!("{BACKBONE_PREFIX}conv{i}");
            backbone.push(Conv2d::new(store, &name, in_ch, c, 4, 2, 1, Activation::LeakyRelu, rng));
            in_ch = c;
        }
        let heads = dims.map(|g, &d| {
            [
                Linear::new(store, &format!("encoder.heads.{g}.layer0"), in_ch, head_hidden, Activation::LeakyRelu, rng),
                Linear::new(store, &format!("encoder.heads.{g}.layer1"), head_hidden, d, Activation::Linear, rng),
            ]
        });
        Self { backbone, heads, input_res, feature_dim: in_ch }
    }

    /// Pooled backbone embedding `[1, feature_dim]`.
    pub fn embed<'g>(&self, b: &Binding<'g>, image: Var<'g>) -> Var<'g> {
        let mut h = image;
        for conv in &self.backbone {
            h = conv.forward(b, h).leaky_relu(LEAKY_SLOPE);
        }
        h.mean_axis(0, false).mean_axis(0, false).reshape(vec![1, self.feature_dim])
    }

    /// Code groups, each `[1, dim]`, for an `[res, res, 3]` image in [-1, 1].
    pub fn forward<'g>(&self, b: &Binding<'g>, image: Var<'g>) -> Groups<Var<'g>> {
        let f = self.embed(b, image);
        self.heads.map(|_, [l0, l1]| l1.forward(b, l0.forward(b, f).leaky_relu(LEAKY_SLOPE)))
    }

    pub fn check_image(&self, image: &Tensor<f32>) -> Result<()> {
        let want = [self.input_res, self.input_res, 3];
        if image.shape() != want {
            return Err(Error::arg("image", format!("expected {want:?}, got {:?}", image.shape())));
        }
        Ok(())
    }

    pub fn encode(&self, store: &ParamStore, image: &Tensor<f32>) -> Result<SemanticCode> {
        self.check_image(image)?;
        let g = Graph::new();
        let b = Binding::frozen(&g, store);
        Ok(code_values(&self.forward(&b, g.constant(image.clone()))))
    }
}
