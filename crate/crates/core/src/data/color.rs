//! BT.601 full-range YCbCr on `[0, 1]` reals, chroma offset by ½.

use crate::error::{Error, Result};

use super::ImageBuffer;

const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;

pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    KR * r + KG * g + KB * b
}

pub fn rgb_to_ycbcr_pixel(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = luma(r, g, b);
    let cb = 0.5 + (b - y) / (2.0 * (1.0 - KB));
    let cr = 0.5 + (r - y) / (2.0 * (1.0 - KR));
    (y, cb, cr)
}

pub fn ycbcr_to_rgb_pixel(y: f64, cb: f64, cr: f64) -> (f64, f64, f64) {
    let r = y + 2.0 * (1.0 - KR) * (cr - 0.5);
    let b = y + 2.0 * (1.0 - KB) * (cb - 0.5);
    let g = (y - KR * r - KB * b) / KG;
    (r, g, b)
}

fn convert(img: &ImageBuffer, f: fn(f64, f64, f64) -> (f64, f64, f64)) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::Data(format!(
            "color conversion needs 3 channels, got {}",
            img.channels()
        )));
    }
    let n = img.width() * img.height();
    let d = img.data();
    let mut out = vec![0.0; 3 * n];
    for i in 0..n {
        let (a, b, c) = f(d[i], d[n + i], d[2 * n + i]);
        out[i] = a;
        out[n + i] = b;
        out[2 * n + i] = c;
    }
    ImageBuffer::new(img.width(), img.height(), 3, out)
}

/// RGB → planar (Y, Cb, Cr).
pub fn rgb_to_ycbcr(img: &ImageBuffer) -> Result<ImageBuffer> {
    convert(img, rgb_to_ycbcr_pixel)
}

/// Planar (Y, Cb, Cr) → RGB.
pub fn ycbcr_to_rgb(img: &ImageBuffer) -> Result<ImageBuffer> {
    convert(img, ycbcr_to_rgb_pixel)
}

/// Luminance of an RGB image; grayscale input is returned unchanged.
pub fn luminance(img: &ImageBuffer) -> ImageBuffer {
    match img.channels() {
        1 => img.clone(),
        _ => {
            let n = img.width() * img.height();
            let d = img.data();
            let y = (0..n).map(|i| luma(d[i], d[n + i], d[2 * n + i])).collect();
            ImageBuffer::new(img.width(), img.height(), 1, y).expect("same dims")
        }
    }
}
