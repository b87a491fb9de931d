//! 2-D convolution over single images in HWC layout.
//!
//! Weights are `[k, k, c_in, c_out]`, which flattens to the
//! `(k*k*c_in) x c_out` matrix multiplied against im2col patches.

use std::sync::Arc;

use crate::real::gemm;
use crate::{Real, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub height: usize,
    pub width: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_hw(&self) -> (usize, usize) {
        let oh = (self.height + 2 * self.pad - self.kernel) / self.stride + 1;
        let ow = (self.width + 2 * self.pad - self.kernel) / self.stride + 1;
        (oh, ow)
    }

    fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_ch
    }
}

pub fn im2col<T: Real>(x: &[T], geo: &ConvGeometry) -> Vec<T> {
    let (oh, ow) = geo.out_hw();
    let c = geo.in_ch;
    let k = geo.kernel;
    let plen = geo.patch_len();
    let mut cols = vec![T::zero(); oh * ow * plen];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut cols[(oy * ow + ox) * plen..(oy * ow + ox + 1) * plen];
            for ky in 0..k {
                let iy = (oy * geo.stride + ky) as isize - geo.pad as isize;
                if iy < 0 || iy >= geo.height as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * geo.stride + kx) as isize - geo.pad as isize;
                    if ix < 0 || ix >= geo.width as isize {
                        continue;
                    }
                    let src = (iy as usize * geo.width + ix as usize) * c;
                    let dst = (ky * k + kx) * c;
                    row[dst..dst + c].copy_from_slice(&x[src..src + c]);
                }
            }
        }
    }
    cols
}

pub fn col2im<T: Real>(cols: &[T], geo: &ConvGeometry) -> Vec<T> {
    let (oh, ow) = geo.out_hw();
    let c = geo.in_ch;
    let k = geo.kernel;
    let plen = geo.patch_len();
    let mut x = vec![T::zero(); geo.height * geo.width * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * plen..(oy * ow + ox + 1) * plen];
            for ky in 0..k {
                let iy = (oy * geo.stride + ky) as isize - geo.pad as isize;
                if iy < 0 || iy >= geo.height as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * geo.stride + kx) as isize - geo.pad as isize;
                    if ix < 0 || ix >= geo.width as isize {
                        continue;
                    }
                    let dst = (iy as usize * geo.width + ix as usize) * c;
                    let src = (ky * k + kx) * c;
                    x[dst..dst + c]
                        .iter_mut()
                        .zip(&row[src..src + c])
                        .for_each(|(a, &b)| *a = *a + b);
                }
            }
        }
    }
    x
}

fn check_weight(w: &Tensor<impl Real>, in_ch: usize) -> (usize, usize) {
    assert_eq!(w.rank(), 4, "conv weight must be [k, k, c_in, c_out], got {:?}", w.shape());
    assert_eq!(w.dim(0), w.dim(1), "conv kernel must be square");
    assert_eq!(w.dim(2), in_ch, "conv weight c_in {} vs input {}", w.dim(2), in_ch);
    (w.dim(0), w.dim(3))
}

impl<'g, T: Real> Var<'g, T> {
    /// Convolution of an `[h, w, c_in]` image, no bias.
    pub fn conv2d(self, weight: Var<'g, T>, stride: usize, pad: usize) -> Var<'g, T> {
        let x = self.value();
        let w = weight.value();
        assert_eq!(x.rank(), 3, "conv2d input must be [h, w, c], got {:?}", x.shape());
        let (k, cout) = check_weight(&w, x.dim(2));
        let geo = ConvGeometry {
            height: x.dim(0),
            width: x.dim(1),
            in_ch: x.dim(2),
            kernel: k,
            stride,
            pad,
        };
        let (oh, ow) = geo.out_hw();
        let plen = geo.patch_len();
        let cols = Arc::new(im2col(x.data(), &geo));
        let mut y = vec![T::zero(); oh * ow * cout];
        gemm(oh * ow, plen, cout, &cols, false, w.data(), false, &mut y, false);
        self.graph().record(&[self, weight], Tensor::new(vec![oh, ow, cout], y), move || {
            Box::new(move |g, need| {
                let m = oh * ow;
                vec![
                    need[0].then(|| {
                        let mut dcols = vec![T::zero(); m * plen];
                        gemm(m, cout, plen, g.data(), false, w.data(), true, &mut dcols, false);
                        Tensor::new(vec![geo.height, geo.width, geo.in_ch], col2im(&dcols, &geo))
                    }),
                    need[1].then(|| {
                        let mut dw = vec![T::zero(); plen * cout];
                        gemm(plen, m, cout, &cols, true, g.data(), false, &mut dw, false);
                        Tensor::new(w.shape().to_vec(), dw)
                    }),
                ]
            })
        })
    }

    /// The input-gradient map of [`Var::conv2d`] as a differentiable op:
    /// given an output-shaped cotangent `self`, returns the `[h, w, c_in]`
    /// cotangent of the input. Being bilinear in (`self`, `weight`), it lets
    /// gradient penalties be differentiated with respect to the weights.
    pub fn conv2d_transpose(
        self,
        weight: Var<'g, T>,
        input_hw: (usize, usize),
        stride: usize,
        pad: usize,
    ) -> Var<'g, T> {
        let gy = self.value();
        let w = weight.value();
        let (k, cout) = (w.dim(0), w.dim(3));
        let geo = ConvGeometry {
            height: input_hw.0,
            width: input_hw.1,
            in_ch: w.dim(2),
            kernel: k,
            stride,
            pad,
        };
        check_weight(&w, geo.in_ch);
        let (oh, ow) = geo.out_hw();
        assert_eq!(gy.shape(), &[oh, ow, cout], "conv2d_transpose cotangent shape");
        let plen = geo.patch_len();
        let m = oh * ow;
        let mut dcols = vec![T::zero(); m * plen];
        gemm(m, cout, plen, gy.data(), false, w.data(), true, &mut dcols, false);
        let z = Tensor::new(vec![geo.height, geo.width, geo.in_ch], col2im(&dcols, &geo));
        self.graph().record(&[self, weight], z, move || {
            Box::new(move |dz, need| {
                let pz = im2col(dz.data(), &geo);
                vec![
                    need[0].then(|| {
                        let mut d = vec![T::zero(); m * cout];
                        gemm(m, plen, cout, &pz, false, w.data(), false, &mut d, false);
                        Tensor::new(vec![oh, ow, cout], d)
                    }),
                    need[1].then(|| {
                        let mut d = vec![T::zero(); plen * cout];
                        gemm(plen, m, cout, &pz, true, gy.data(), false, &mut d, false);
                        Tensor::new(w.shape().to_vec(), d)
                    }),
                ]
            })
        })
    }
}
