//! Procedural toy images for smoke tests and desk-scale experiments.
//!
//! Each image is a smooth background with a handful of anti-aliased disks,
//! rectangles, rings and striped patches. Generation is a pure function of
//! the seed.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::pairs::MANIFEST_NAME;
use super::ImageBuffer;

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Ring {
        cx: f64,
        cy: f64,
        r: f64,
        width: f64,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    Stripes {
        cx: f64,
        cy: f64,
        r: f64,
        angle: f64,
        period: f64,
    },
}

impl Shape {
    fn covers(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disk { cx, cy, r } => (x - cx).hypot(y - cy) <= r,
            Shape::Ring { cx, cy, r, width } => ((x - cx).hypot(y - cy) - r).abs() <= width / 2.0,
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
            Shape::Stripes {
                cx,
                cy,
                r,
                angle,
                period,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                if dx.abs() > r || dy.abs() > r {
                    return false;
                }
                let u = dx * angle.cos() + dy * angle.sin();
                (u / period).rem_euclid(1.0) < 0.5
            }
        }
    }

    fn random(rng: &mut ChaCha8Rng, size: f64) -> Self {
        let cx = rng.gen_range(0.0..size);
        let cy = rng.gen_range(0.0..size);
        match rng.gen_range(0..4) {
            0 => Shape::Disk {
                cx,
                cy,
                r: rng.gen_range(0.05..0.25) * size,
            },
            1 => Shape::Ring {
                cx,
                cy,
                r: rng.gen_range(0.1..0.3) * size,
                width: rng.gen_range(1.0..4.0),
            },
            2 => {
                let w = rng.gen_range(0.1..0.5) * size;
                let h = rng.gen_range(0.1..0.5) * size;
                Shape::Rect {
                    x0: cx - w / 2.0,
                    y0: cy - h / 2.0,
                    x1: cx + w / 2.0,
                    y1: cy + h / 2.0,
                }
            }
            _ => Shape::Stripes {
                cx,
                cy,
                r: rng.gen_range(0.15..0.35) * size,
                angle: rng.gen_range(0.0..std::f64::consts::PI),
                period: rng.gen_range(3.0..9.0),
            },
        }
    }
}

const SUPERSAMPLE: usize = 4;

/// One `size × size` RGB image.
pub fn toy_image(size: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let base: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.2..0.8));
    let grad: [(f64, f64); 3] = std::array::from_fn(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
    let n_shapes = rng.gen_range(4..9);
    let shapes: Vec<(Shape, [f64; 3])> = (0..n_shapes)
        .map(|_| {
            let shape = Shape::random(&mut rng, s);
            let color = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            (shape, color)
        })
        .collect();

    let plane = size * size;
    let mut data = vec![0.0; 3 * plane];
    let sub = SUPERSAMPLE as f64;
    for y in 0..size {
        for x in 0..size {
            let mut acc = [0.0; 3];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) / sub;
                    let py = y as f64 + (sy as f64 + 0.5) / sub;
                    let mut c: [f64; 3] =
                        std::array::from_fn(|k| base[k] + grad[k].0 * (px / s - 0.5) + grad[k].1 * (py / s - 0.5));
                    for (shape, color) in &shapes {
                        if shape.covers(px, py) {
                            c = *color;
                        }
                    }
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            for k in 0..3 {
                data[k * plane + y * size + x] = (acc[k] / (sub * sub)).clamp(0.0, 1.0);
            }
        }
    }
    ImageBuffer::new(size, size, 3, data).expect("valid dims").quantized()
}

/// `count` toy images with seeds `seed, seed + 1, …`.
pub fn toy_corpus(count: usize, size: usize, seed: u64) -> Vec<ImageBuffer> {
    (0..count as u64)
        .map(|i| toy_image(size, seed.wrapping_add(i)))
        .collect()
}

/// Writes a toy corpus as PNG files plus a manifest under `dir`.
pub fn write_toy_corpus(dir: &Path, count: usize, size: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (i, img) in toy_corpus(count, size, seed).iter().enumerate() {
        let name = format!("toy_{i:03}.png");
        img.save(&dir.join(&name))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}
