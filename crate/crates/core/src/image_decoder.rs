//! Render blocks (2x learnable upsampling, appearance modulation, ToRGB
//! taps) and the lightweight segmentation branch.

use morpheus_tensor::{Binding, ParamStore, Var};
use rand::Rng;

use crate::nn::{Activation, Conv2d, Linear, ModulatedLayer, ACT_GAIN, LEAKY_SLOPE};

/// Normalized binomial taps; the 2-D kernel is their outer product.
pub const BLUR_TAPS: [f32; 4] = [0.125, 0.375, 0.375, 0.125];

/// Pixel shuffle by 2 followed by the fixed blur.
pub fn upsample2x<'g>(x: Var<'g>) -> Var<'g> {
    x.pixel_shuffle(2).blur(&BLUR_TAPS)
}

#[derive(Clone, Debug)]
pub struct RenderBlock {
    pub expand: Linear,
    pub mods: [ModulatedLayer; 2],
    pub to_rgb: Linear,
    pub out_ch: usize,
}

pub struct BlockOutput<'g> {
    /// `[2h, 2w, out_ch]`
    pub features: Var<'g>,
    /// `[2h, 2w, 3]`
    pub rgb: Var<'g>,
}

impl RenderBlock {
    pub fn new(
        store: &mut ParamStore,
        index: usize,
        in_ch: usize,
        out_ch: usize,
        cond_dim: usize,
        eps: f32,
        rng: &mut impl Rng,
    ) -> Self {
        let name = format!("blocks.{index}");
        let expand = Linear::new(store, &format!("{name}.expand"), in_ch, 4 * out_ch, Activation::Linear, rng);
        let bound = (3.0 / out_ch as f32).sqrt();
        let mods = [0, 1].map(|j| {
            ModulatedLayer::new(store, &format!("{name}.mod{j}"), out_ch, out_ch, cond_dim, bound, eps, rng)
        });
        let to_rgb = Linear::new(store, &format!("{name}.to_rgb"), out_ch, 3, Activation::Linear, rng);
        Self { expand, mods, to_rgb, out_ch }
    }

    pub fn forward<'g>(&self, b: &Binding<'g>, x: Var<'g>, appearance: Var<'g>) -> BlockOutput<'g> {
        let up = upsample2x(self.expand.forward_image(b, x));
        let (h, w) = (up.dim(0), up.dim(1));
        let mut y = up.reshape(vec![h * w, self.out_ch]);
        for m in &self.mods {
            y = m.forward(b, y, appearance).leaky_relu(LEAKY_SLOPE).scale(ACT_GAIN);
        }
        let rgb = self.to_rgb.forward(b, y).reshape(vec![h, w, 3]);
        BlockOutput { features: y.reshape(vec![h, w, self.out_ch]), rgb }
    }
}

/// Per-resolution 1x1 projections, bilinearly upsampled and summed, then two
/// 3x3 convolutions down to one mask logit per pixel.
#[derive(Clone, Debug)]
pub struct SegBranch {
    pub projections: Vec<Linear>,
    pub conv0: Conv2d,
    pub conv1: Conv2d,
}

impl SegBranch {
    pub fn new(store: &mut ParamStore, block_channels: &[usize], seg_ch: usize, rng: &mut impl Rng) -> Self {
        let projections = block_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| Linear::new(store, &format!("seg.proj{i}"), c, seg_ch, Activation::Linear, rng))
            .collect();
        let conv0 = Conv2d::new(store, "seg.conv0", seg_ch, seg_ch, 3, 1, 1, Activation::LeakyRelu, rng);
        let conv1 = Conv2d::new(store, "seg.conv1", seg_ch, 1, 3, 1, 1, Activation::Linear, rng);
        Self { projections, conv0, conv1 }
    }

    /// Mask logits `[H, W, 1]` at the resolution of the last feature map.
    pub fn forward<'g>(&self, b: &Binding<'g>, features: &[Var<'g>]) -> Var<'g> {
        assert_eq!(features.len(), self.projections.len(), "one feature map per block");
        let last = features.last().expect("at least one block");
        let (h, w) = (last.dim(0), last.dim(1));
        let mut acc: Option<Var<'g>> = None;
        for (p, f) in self.projections.iter().zip(features) {
            let y = p.forward_image(b, *f).resize_bilinear(h, w);
            acc = Some(match acc {
                Some(a) => a.add(y),
                None => y,
            });
        }
        let x = self.conv0.forward(b, acc.expect("non-empty")).leaky_relu(LEAKY_SLOPE);
        self.conv1.forward(b, x)
    }
}
