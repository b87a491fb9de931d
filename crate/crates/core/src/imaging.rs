//! Pixel conversions and antialiased bicubic resampling of `[h, w, c]` images.

use morpheus_tensor::Tensor;

/// `[-1, 1] -> [0, 255]`, rounding half up, clamped.
pub fn to_u8(v: f32) -> u8 {
    let x = ((v.clamp(-1.0, 1.0) as f64 + 1.0) * 0.5 * 255.0 + 0.5).floor();
    x.clamp(0.0, 255.0) as u8
}

/// `[0, 255] -> [-1, 1]`.
pub fn from_u8(v: u8) -> f32 {
    v as f32 / 127.5 - 1.0
}

fn cubic(x: f64) -> f64 {
    // Keys kernel, a = -0.5
    let a = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * a
    } else {
        0.0
    }
}

/// Normalized taps `(first index, weights)` per output sample; the kernel is
/// stretched by the downscale factor so minification is antialiased.
fn cubic_taps(n_in: usize, n_out: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = n_in as f64 / n_out as f64;
    let support = 2.0 * scale.max(1.0);
    let stretch = scale.max(1.0);
    (0..n_out)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale;
            let lo = ((center - support).floor() as isize).max(0) as usize;
            let hi = ((center + support).ceil() as usize).min(n_in);
            let mut w: Vec<f64> =
                (lo..hi).map(|i| cubic((i as f64 + 0.5 - center) / stretch)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            (lo, w)
        })
        .collect()
}

/// Bicubic resize to `[oh, ow, c]`.
pub fn resize_bicubic(x: &Tensor<f32>, oh: usize, ow: usize) -> Tensor<f32> {
    let (h, w, c) = (x.dim(0), x.dim(1), x.dim(2));
    if (h, w) == (oh, ow) {
        return x.clone();
    }
    let src = x.data();
    let tx = cubic_taps(w, ow);
    let mut tmp = vec![0.0f64; h * ow * c];
    for y in 0..h {
        for (o, (lo, wts)) in tx.iter().enumerate() {
            for (k, wt) in wts.iter().enumerate() {
                let s = (y * w + lo + k) * c;
                let d = (y * ow + o) * c;
                for ch in 0..c {
                    tmp[d + ch] += wt * src[s + ch] as f64;
                }
            }
        }
    }
    let ty = cubic_taps(h, oh);
    let mut out = vec![0.0f32; oh * ow * c];
    for (o, (lo, wts)) in ty.iter().enumerate() {
        for xx in 0..ow {
            for ch in 0..c {
                let v: f64 = wts.iter().enumerate().map(|(k, wt)| wt * tmp[((lo + k) * ow + xx) * c + ch]).sum();
                out[(o * ow + xx) * c + ch] = v as f32;
            }
        }
    }
    Tensor::new(vec![oh, ow, c], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u8_mapping_rounds_half_up() {
        assert_eq!(to_u8(-1.0), 0);
        assert_eq!(to_u8(1.0), 255);
        assert_eq!(to_u8(0.0), 128); // 127.5 rounds up
        assert_eq!(to_u8(2.0), 255);
        for v in 0..=255u8 {
            assert_eq!(to_u8(from_u8(v)), v);
        }
    }

    #[test]
    fn bicubic_keeps_constants_and_averages_blocks() {
        let x = Tensor::full(vec![8, 8, 2], 0.3f32);
        let y = resize_bicubic(&x, 2, 4);
        assert!(y.data().iter().all(|v| (v - 0.3).abs() < 1e-6));
        // a vertical step edge stays monotone after downscaling
        let mut e = Tensor::zeros(vec![4, 8, 1]);
        for r in 0..4 {
            for c in 4..8 {
                e.data_mut()[r * 8 + c] = 1.0;
            }
        }
        let d = resize_bicubic(&e, 2, 4);
        let row: Vec<f32> = d.data()[..4].to_vec();
        assert!(row.windows(2).all(|p| p[0] <= p[1] + 1e-6), "{row:?}");
    }
}
