//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use morpheus_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylemorpheus::{ModelConfig, SemanticCode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain loop over one ray: returns the composited feature and the weights.
/// Written from the formulas directly, sharing no code with the library.
pub fn ray_oracle(sigma: &[f64], delta: &[f64], r: &[f64], d_f: usize) -> (Vec<f64>, Vec<f64>) {
    let n = sigma.len();
    let mut out = vec![0.0; d_f];
    let mut weights = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let mut optical = 0.0;
        for j in 0..i {
            optical += sigma[j] * delta[j];
        }
        let t = (-optical).exp();
        let a = 1.0 - (-sigma[i] * delta[i]).exp();
        weights.push(t * a);
        for k in 0..d_f {
            out[k] += t * a * r[i * d_f + k];
        }
    }
    (out, weights)
}

/// Materialized modulated weight `w''[o][i] = w[o][i] s[i] / sqrt(sum_i (w s)^2 + eps)`.
pub fn modulated_weight_oracle(w: &[f64], s: &[f64], out_ch: usize, in_ch: usize, eps: f64) -> Vec<f64> {
    let mut m = vec![0.0; out_ch * in_ch];
    for o in 0..out_ch {
        let mut norm = eps;
        for i in 0..in_ch {
            let v = w[o * in_ch + i] * s[i];
            norm += v * v;
        }
        let inv = 1.0 / norm.sqrt();
        for i in 0..in_ch {
            m[o * in_ch + i] = w[o * in_ch + i] * s[i] * inv;
        }
    }
    m
}

/// `x [n, in] * m^T -> [n, out]`.
pub fn dense_oracle(x: &[f64], m: &[f64], n: usize, in_ch: usize, out_ch: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * out_ch];
    for p in 0..n {
        for o in 0..out_ch {
            let mut acc = 0.0;
            for i in 0..in_ch {
                acc += x[p * in_ch + i] * m[o * in_ch + i];
            }
            y[p * out_ch + o] = acc;
        }
    }
    y
}

/// Rotation about a unit axis by Rodrigues' formula.
pub fn axis_angle(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let k = 1.0 - c;
    [
        [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
        [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
        [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
    ]
}

pub fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn random_tensor(rng: &mut impl Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

pub fn random_code(cfg: &ModelConfig, rng: &mut impl Rng, scale: f32) -> SemanticCode {
    cfg.codes.map(|_, &d| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
}

/// Smaller variant of the toy preset for fast structural tests.
pub fn tiny_config() -> ModelConfig {
    let mut cfg = ModelConfig::toy();
    cfg.preset = "tiny".into();
    cfg.camera.grid_res = 8;
    cfg.n_samples = 8;
    cfg.field_width = 32;
    cfg.feature_dim = 16;
    cfg.block_channels = vec![16, 16];
    cfg.encoder_channels = vec![8, 16, 16];
    cfg.encoder_head_hidden = 32;
    cfg.disc_channels = vec![8, 16, 16];
    cfg
}

pub fn bits(t: &Tensor<f32>) -> Vec<u32> {
    t.data().iter().map(|v| v.to_bits()).collect()
}
