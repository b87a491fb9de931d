//! Spatial rearrangements and fixed filters over `[h, w, c]` images.

use crate::{Real, Tensor, Var};

fn hwc<T: Real>(x: &Tensor<T>, op: &str) -> (usize, usize, usize) {
    assert_eq!(x.rank(), 3, "{op} needs an [h, w, c] tensor, got {:?}", x.shape());
    (x.dim(0), x.dim(1), x.dim(2))
}

/// Sub-pixel shuffle: `[h, w, c*r*r] -> [h*r, w*r, c]` with
/// `out[r*y + dy, r*x + dx, ch] = in[y, x, ch*r*r + dy*r + dx]`.
pub fn pixel_shuffle_tensor<T: Real>(x: &Tensor<T>, r: usize) -> Tensor<T> {
    let (h, w, cin) = hwc(x, "pixel_shuffle");
    assert_eq!(cin % (r * r), 0, "pixel_shuffle channels {cin} not divisible by {}", r * r);
    let c = cin / (r * r);
    let (oh, ow) = (h * r, w * r);
    let src = x.data();
    let mut out = vec![T::zero(); oh * ow * c];
    for y in 0..h {
        for xx in 0..w {
            let base = (y * w + xx) * cin;
            for ch in 0..c {
                for dy in 0..r {
                    for dx in 0..r {
                        let o = ((y * r + dy) * ow + xx * r + dx) * c + ch;
                        out[o] = src[base + ch * r * r + dy * r + dx];
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

/// Inverse of [`pixel_shuffle_tensor`].
pub fn pixel_unshuffle_tensor<T: Real>(x: &Tensor<T>, r: usize) -> Tensor<T> {
    let (oh, ow, c) = hwc(x, "pixel_unshuffle");
    assert!(oh % r == 0 && ow % r == 0, "pixel_unshuffle size not divisible by {r}");
    let (h, w, cin) = (oh / r, ow / r, c * r * r);
    let src = x.data();
    let mut out = vec![T::zero(); h * w * cin];
    for y in 0..h {
        for xx in 0..w {
            let base = (y * w + xx) * cin;
            for ch in 0..c {
                for dy in 0..r {
                    for dx in 0..r {
                        let i = ((y * r + dy) * ow + xx * r + dx) * c + ch;
                        out[base + ch * r * r + dy * r + dx] = src[i];
                    }
                }
            }
        }
    }
    Tensor::new(vec![h, w, cin], out)
}

/// One separable pass of a correlation filter along `axis` (0 = rows, 1 = cols)
/// with edge-clamped sampling; `adjoint` applies the transpose map.
fn filter_pass<T: Real>(
    x: &Tensor<T>,
    taps: &[T],
    pad_lo: usize,
    axis: usize,
    adjoint: bool,
) -> Tensor<T> {
    let (h, w, c) = hwc(x, "blur");
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    let n = if axis == 0 { h } else { w };
    let clamp = |i: isize| i.clamp(0, n as isize - 1) as usize;
    for y in 0..h {
        for xx in 0..w {
            let pos = if axis == 0 { y } else { xx };
            let at = |p: usize| if axis == 0 { (p * w + xx) * c } else { (y * w + p) * c };
            let o = (y * w + xx) * c;
            for (a, &tap) in taps.iter().enumerate() {
                let q = clamp(pos as isize + a as isize - pad_lo as isize);
                let i = at(q);
                if adjoint {
                    for ch in 0..c {
                        out[i + ch] = out[i + ch] + tap * src[o + ch];
                    }
                } else {
                    for ch in 0..c {
                        out[o + ch] = out[o + ch] + tap * src[i + ch];
                    }
                }
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Depthwise separable blur with `taps` along both axes, edge-clamped so a
/// constant image stays constant when the taps sum to one.
pub fn blur_tensor<T: Real>(x: &Tensor<T>, taps: &[T]) -> Tensor<T> {
    let pad = (taps.len() - 1) / 2;
    filter_pass(&filter_pass(x, taps, pad, 1, false), taps, pad, 0, false)
}

fn blur_adjoint<T: Real>(g: &Tensor<T>, taps: &[T]) -> Tensor<T> {
    let pad = (taps.len() - 1) / 2;
    filter_pass(&filter_pass(g, taps, pad, 0, true), taps, pad, 1, true)
}

/// Half-pixel-centred linear interpolation weights from `n_in` to `n_out` samples.
fn linear_weights(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            let f = src - i0 as f64;
            (i0, i1, 1.0 - f, f)
        })
        .collect()
}

fn resize_axis<T: Real>(
    x: &Tensor<T>,
    n_out: usize,
    axis: usize,
    weights: &[(usize, usize, f64, f64)],
    adjoint_from: Option<usize>,
) -> Tensor<T> {
    // Forward: x has n_in along axis, output has n_out.
    // Adjoint: x has n_out along axis (a cotangent), output has n_in.
    let (h, w, c) = hwc(x, "resize");
    let src = x.data();
    let (oh, ow) = match (adjoint_from, axis) {
        (None, 0) => (n_out, w),
        (None, _) => (h, n_out),
        (Some(n_in), 0) => (n_in, w),
        (Some(n_in), _) => (h, n_in),
    };
    let mut out = vec![T::zero(); oh * ow * c];
    let wts: Vec<_> = weights
        .iter()
        .map(|&(i0, i1, w0, w1)| (i0, i1, T::lit(w0), T::lit(w1)))
        .collect();
    let (lines, line_len) = if axis == 0 { (w, h) } else { (h, w) };
    let _ = line_len;
    for line in 0..lines {
        for (o, &(i0, i1, w0, w1)) in wts.iter().enumerate() {
            let idx = |p: usize, width: usize| {
                if axis == 0 {
                    (p * width + line) * c
                } else {
                    (line * width + p) * c
                }
            };
            if adjoint_from.is_none() {
                let (a, b, d) = (idx(i0, w), idx(i1, w), idx(o, ow));
                for ch in 0..c {
                    out[d + ch] = w0 * src[a + ch] + w1 * src[b + ch];
                }
            } else {
                let (a, b, s) = (idx(i0, ow), idx(i1, ow), idx(o, w));
                for ch in 0..c {
                    out[a + ch] = out[a + ch] + w0 * src[s + ch];
                    out[b + ch] = out[b + ch] + w1 * src[s + ch];
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

/// Bilinear resize (half-pixel centres, edge clamped) to `[oh, ow, c]`.
pub fn resize_bilinear_tensor<T: Real>(x: &Tensor<T>, oh: usize, ow: usize) -> Tensor<T> {
    let (h, w, _) = hwc(x, "resize");
    let wy = linear_weights(h, oh);
    let wx = linear_weights(w, ow);
    let tmp = resize_axis(x, ow, 1, &wx, None);
    resize_axis(&tmp, oh, 0, &wy, None)
}

fn resize_bilinear_adjoint<T: Real>(g: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (oh, ow, _) = hwc(g, "resize");
    let wy = linear_weights(h, oh);
    let wx = linear_weights(w, ow);
    let tmp = resize_axis(g, oh, 0, &wy, Some(h));
    resize_axis(&tmp, ow, 1, &wx, Some(w))
}

impl<'g, T: Real> Var<'g, T> {
    pub fn pixel_shuffle(self, r: usize) -> Var<'g, T> {
        let y = pixel_shuffle_tensor(&self.value(), r);
        self.graph().record(&[self], y, move || {
            Box::new(move |g, _| vec![Some(pixel_unshuffle_tensor(g, r))])
        })
    }

    pub fn blur(self, taps: &[T]) -> Var<'g, T> {
        let taps = taps.to_vec();
        let y = blur_tensor(&self.value(), &taps);
        self.graph().record(&[self], y, move || {
            Box::new(move |g, _| vec![Some(blur_adjoint(g, &taps))])
        })
    }

    pub fn resize_bilinear(self, oh: usize, ow: usize) -> Var<'g, T> {
        let x = self.value();
        let (h, w) = (x.dim(0), x.dim(1));
        if (h, w) == (oh, ow) {
            return self;
        }
        let y = resize_bilinear_tensor(&x, oh, ow);
        self.graph().record(&[self], y, move || {
            Box::new(move |g, _| vec![Some(resize_bilinear_adjoint(g, h, w))])
        })
    }
}
