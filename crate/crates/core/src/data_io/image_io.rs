//! 8-bit PNG I/O. In memory, images are `[h, w, 3]` in [-1, 1] and masks
//! `[h, w, 1]` in {0, 1}.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};
use morpheus_tensor::Tensor;

use crate::error::{Error, Result};
use crate::imaging::{from_u8, to_u8};

fn image_err(path: &Path, e: impl ToString) -> Error {
    Error::Image { path: path.to_path_buf(), reason: e.to_string() }
}

pub fn rgb_to_tensor(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = img.dimensions();
    Tensor::new(vec![h as usize, w as usize, 3], img.as_raw().iter().map(|&v| from_u8(v)).collect())
}

pub fn tensor_to_rgb(t: &Tensor<f32>) -> RgbImage {
    assert_eq!(t.rank(), 3, "image tensor must be [h, w, 3]");
    assert_eq!(t.dim(2), 3, "image tensor must have 3 channels");
    let raw = t.data().iter().map(|&v| to_u8(v)).collect();
    RgbImage::from_raw(t.dim(1) as u32, t.dim(0) as u32, raw).expect("buffer size matches")
}

/// Binary mask from a grayscale image, `value / 255 >= 0.5`.
pub fn gray_to_mask(img: &GrayImage) -> Tensor<f32> {
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| if v as f32 / 255.0 >= 0.5 { 1.0 } else { 0.0 }).collect();
    Tensor::new(vec![h as usize, w as usize, 1], data)
}

/// Thresholds `[h, w, 1]` probabilities at 0.5 into a 0/255 image.
pub fn mask_to_gray(t: &Tensor<f32>) -> GrayImage {
    assert_eq!(t.rank(), 3, "mask tensor must be [h, w, 1]");
    let raw = t.data().iter().map(|&v| if v >= 0.5 { 255 } else { 0 }).collect();
    GrayImage::from_raw(t.dim(1) as u32, t.dim(0) as u32, raw).expect("buffer size matches")
}

pub fn encode_png_rgb(t: &Tensor<f32>) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    tensor_to_rgb(t).write_to(&mut buf, ImageFormat::Png).expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn encode_png_mask(t: &Tensor<f32>) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    mask_to_gray(t).write_to(&mut buf, ImageFormat::Png).expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn decode_rgb(bytes: &[u8]) -> Result<Tensor<f32>> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::arg("image", e.to_string()))?;
    Ok(rgb_to_tensor(&img.to_rgb8()))
}

pub fn decode_mask(bytes: &[u8]) -> Result<Tensor<f32>> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::arg("mask", e.to_string()))?;
    Ok(gray_to_mask(&img.to_luma8()))
}

pub fn load_rgb(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    Ok(rgb_to_tensor(&img.to_rgb8()))
}

pub fn load_mask(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    Ok(gray_to_mask(&img.to_luma8()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_rgb(path: &Path, t: &Tensor<f32>) -> Result<()> {
    write(path, &encode_png_rgb(t))
}

pub fn save_mask(path: &Path, t: &Tensor<f32>) -> Result<()> {
    write(path, &encode_png_mask(t))
}
