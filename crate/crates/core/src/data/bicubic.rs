//! Separable cubic-convolution resampling (Keys kernel, `a = −0.5`).
//!
//! Sample positions follow the pixel-center convention
//! `src = (dst + ½) / scale − ½`. When shrinking, the kernel is stretched by
//! `1 / scale` to low-pass the signal before decimation. Taps falling
//! outside the image are clamped to the nearest edge pixel, and each output
//! pixel's weights are normalized to sum to one.
//!
//! Each sample is evaluated as `x₀ + Σ wⱼ(xⱼ − x₀)` with `x₀` the first tap,
//! which equals `Σ wⱼxⱼ` when the weights sum to one and keeps constant
//! regions exactly constant in floating point.

use crate::error::{Error, Result};

use super::ImageBuffer;

pub const CUBIC_A: f64 = -0.5;

/// The cubic convolution kernel; zero outside `(−2, 2)`.
pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps and weights for one output sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Taps {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-output-sample taps for resampling an axis of length `input` to `output`.
pub fn axis_taps(input: usize, output: usize) -> Vec<Taps> {
    let scale = output as f64 / input as f64;
    let shrink = scale < 1.0;
    let support = if shrink { 2.0 / scale } else { 2.0 };
    (0..output)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut indices = Vec::new();
            let mut weights = Vec::new();
            for j in lo..=hi {
                let d = center - j as f64;
                let w = if shrink {
                    scale * cubic_kernel(scale * d)
                } else {
                    cubic_kernel(d)
                };
                if w == 0.0 {
                    continue;
                }
                indices.push(j.clamp(0, input as isize - 1) as usize);
                weights.push(w);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Taps { indices, weights }
        })
        .collect()
}

fn resample_rows(src: &[f64], width: usize, height: usize, taps: &[Taps]) -> Vec<f64> {
    let out_w = taps.len();
    let mut out = vec![0.0; out_w * height];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for (x, t) in taps.iter().enumerate() {
            let base = row[t.indices[0]];
            let delta: f64 = t
                .indices
                .iter()
                .zip(&t.weights)
                .map(|(&j, &w)| w * (row[j] - base))
                .sum();
            out[y * out_w + x] = base + delta;
        }
    }
    out
}

fn resample_cols(src: &[f64], width: usize, taps: &[Taps]) -> Vec<f64> {
    let out_h = taps.len();
    let mut out = vec![0.0; width * out_h];
    for (y, t) in taps.iter().enumerate() {
        let dst = &mut out[y * width..(y + 1) * width];
        let base = &src[t.indices[0] * width..(t.indices[0] + 1) * width];
        for (&j, &w) in t.indices.iter().zip(&t.weights) {
            let row = &src[j * width..(j + 1) * width];
            for ((d, s), b) in dst.iter_mut().zip(row).zip(base) {
                *d += w * (s - b);
            }
        }
        for (d, b) in dst.iter_mut().zip(base) {
            *d += b;
        }
    }
    out
}

/// Resamples every channel to `width × height`.
pub fn resize(img: &ImageBuffer, width: usize, height: usize) -> Result<ImageBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::Data(format!("bicubic target size {width}x{height} is empty")));
    }
    let (w0, h0) = (img.width(), img.height());
    let xt = axis_taps(w0, width);
    let yt = axis_taps(h0, height);
    let plane = w0 * h0;
    let mut data = Vec::with_capacity(width * height * img.channels());
    for c in 0..img.channels() {
        let src = &img.data()[c * plane..(c + 1) * plane];
        let tmp = resample_cols(src, w0, &yt);
        data.extend(resample_rows(&tmp, w0, height, &xt));
    }
    ImageBuffer::new(width, height, img.channels(), data)
}

/// Shrinks by an integer factor; sides must be divisible by `factor`.
pub fn downscale(img: &ImageBuffer, factor: usize) -> Result<ImageBuffer> {
    if factor == 0 || !img.width().is_multiple_of(factor) || !img.height().is_multiple_of(factor) {
        return Err(Error::Data(format!(
            "{}x{} is not divisible by factor {factor}",
            img.width(),
            img.height()
        )));
    }
    resize(img, img.width() / factor, img.height() / factor)
}

pub fn upscale(img: &ImageBuffer, factor: usize) -> Result<ImageBuffer> {
    if factor == 0 {
        return Err(Error::Data("upscale factor must be positive".into()));
    }
    resize(img, img.width() * factor, img.height() * factor)
}

/// Resizes by a real factor, rounding the target size to the nearest pixel.
pub fn rescale(img: &ImageBuffer, factor: f64) -> Result<ImageBuffer> {
    if factor.is_nan() || factor <= 0.0 {
        return Err(Error::Data(format!("scale factor {factor} must be positive")));
    }
    let w = (img.width() as f64 * factor).round() as usize;
    let h = (img.height() as f64 * factor).round() as usize;
    resize(img, w, h)
}
