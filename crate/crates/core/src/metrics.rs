//! Full-reference quality scores on single-channel images.
//!
//! Both scores assume a peak value of 1 and first remove `border` pixels from
//! every side of both images.

use crate::data::ImageBuffer;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalProtocol {
    /// Pixels removed from each side before scoring.
    pub border: usize,
    /// Snap the model output to the 8-bit grid before scoring.
    pub quantize: bool,
}

impl EvalProtocol {
    /// Crop equal to the scale factor, quantized output.
    pub fn for_scale(scale: usize) -> Self {
        EvalProtocol {
            border: scale,
            quantize: true,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "luminance only, peak 1.0, border crop {} px, output quantization {}",
            self.border,
            if self.quantize { "8-bit" } else { "off" }
        )
    }
}

fn cropped_pair(a: &ImageBuffer, b: &ImageBuffer, border: usize) -> Result<(ImageBuffer, ImageBuffer)> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(Error::shape(
            "metric",
            format!(
                "image sizes differ: {}x{}x{} vs {}x{}x{}",
                a.width(),
                a.height(),
                a.channels(),
                b.width(),
                b.height(),
                b.channels()
            ),
        ));
    }
    if a.channels() != 1 {
        return Err(Error::shape(
            "metric",
            format!("expected one channel, got {}", a.channels()),
        ));
    }
    if 2 * border >= a.width() || 2 * border >= a.height() {
        return Err(Error::shape(
            "metric",
            format!("border {border} leaves nothing of a {}x{} image", a.width(), a.height()),
        ));
    }
    let (w, h) = (a.width() - 2 * border, a.height() - 2 * border);
    Ok((a.crop(border, border, w, h)?, b.crop(border, border, w, h)?))
}

pub fn mse(a: &ImageBuffer, b: &ImageBuffer, border: usize) -> Result<f64> {
    let (a, b) = cropped_pair(a, b, border)?;
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n)
}

/// `10·log10(1 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, border: usize) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b, border)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Normalized 2-D Gaussian window, row major.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g1: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g1.iter().sum();
    let g1: Vec<f64> = g1.iter().map(|v| v / s).collect();
    g1.iter().flat_map(|&a| g1.iter().map(move |&b| a * b)).collect()
}

/// Mean SSIM over every window that fits entirely inside the cropped image.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, border: usize) -> Result<f64> {
    let (a, b) = cropped_pair(a, b, border)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::shape(
            "ssim",
            format!("{w}x{h} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        ));
    }
    let win = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (da, db) = (a.data(), b.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..SSIM_WINDOW {
                let row = (y0 + j) * w + x0;
                for i in 0..SSIM_WINDOW {
                    let k = win[j * SSIM_WINDOW + i];
                    let (va, vb) = (da[row + i], db[row + i]);
                    ma += k * va;
                    mb += k * vb;
                    saa += k * va * va;
                    sbb += k * vb * vb;
                    sab += k * va * vb;
                }
            }
            let var_a = saa - ma * ma;
            let var_b = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
