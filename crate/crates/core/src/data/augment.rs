//! Training-time augmentation: flips, quarter-turn rotations, rescaling.

use rand::Rng;

use super::ImageBuffer;

/// Rescale factors drawn during augmentation.
pub const SCALE_FACTORS: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flip {
    None,
    /// Mirror left–right.
    Horizontal,
    /// Mirror top–bottom.
    Vertical,
}

/// A flip followed by `quarter_turns` counter-clockwise rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Orientation {
    pub flip: Flip,
    pub quarter_turns: u8,
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation {
        flip: Flip::None,
        quarter_turns: 0,
    };

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let flip = match rng.gen_range(0..3) {
            0 => Flip::None,
            1 => Flip::Horizontal,
            _ => Flip::Vertical,
        };
        Orientation {
            flip,
            quarter_turns: rng.gen_range(0..4),
        }
    }

    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        let mut out = match self.flip {
            Flip::None => img.clone(),
            Flip::Horizontal => flip_horizontal(img),
            Flip::Vertical => flip_vertical(img),
        };
        for _ in 0..self.quarter_turns % 4 {
            out = rotate90(&out);
        }
        out
    }
}

fn remap(img: &ImageBuffer, width: usize, height: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> ImageBuffer {
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..img.channels() {
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = src(x, y);
                data.push(img.get(c, sx, sy));
            }
        }
    }
    ImageBuffer::new(width, height, img.channels(), data).expect("same element count")
}

pub fn flip_horizontal(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    remap(img, w, img.height(), |x, y| (w - 1 - x, y))
}

pub fn flip_vertical(img: &ImageBuffer) -> ImageBuffer {
    let h = img.height();
    remap(img, img.width(), h, |x, y| (x, h - 1 - y))
}

/// Rotates 90° counter-clockwise; width and height swap.
pub fn rotate90(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    // output (x, y) on an h×w grid reads input column w−1−y, row x
    remap(img, h, w, |x, y| (w - 1 - y, x))
}
