use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Planar real-valued image, nominally in `[0, 1]`.
///
/// Values are kept at full precision internally; clamping and 8-bit
/// quantization happen only on export.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(format!("empty image {width}x{height}")));
        }
        if !(channels == 1 || channels == 3) {
            return Err(Error::Data(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Data(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels]).expect("valid dims")
    }

    /// Builds a single-channel image from a row-major closure.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, 1, data).expect("valid dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// One channel as a grayscale image.
    pub fn channel(&self, c: usize) -> ImageBuffer {
        let n = self.width * self.height;
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data[c * n..(c + 1) * n].to_vec(),
        }
    }

    /// Stacks same-sized grayscale planes into one image.
    pub fn from_planes(planes: &[ImageBuffer]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Data("no planes".into()))?;
        let mut data = Vec::with_capacity(first.data.len() * planes.len());
        for p in planes {
            if p.channels != 1 || p.width != first.width || p.height != first.height {
                return Err(Error::Data("planes differ in size or are not grayscale".into()));
            }
            data.extend_from_slice(&p.data);
        }
        Self::new(first.width, first.height, planes.len(), data)
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height || width == 0 || height == 0 {
            return Err(Error::Data(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels);
        for c in 0..self.channels {
            for y in y0..y0 + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + x0..row + x0 + width]);
            }
        }
        Self::new(width, height, self.channels, data)
    }

    /// Drops the right/bottom remainder so both sides are multiples of `m`.
    pub fn crop_to_multiple(&self, m: usize) -> Result<Self> {
        let (w, h) = (self.width - self.width % m, self.height - self.height % m);
        self.crop(0, 0, w, h)
    }

    /// Same image with every value snapped to the 8-bit grid, clamped to `[0, 1]`.
    pub fn quantized(&self) -> Self {
        ImageBuffer {
            data: self.data.iter().map(|&v| f64::from(to_u8(v)) / 255.0).collect(),
            ..self.clone()
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ImageBuffer {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn zip_map(&self, other: &ImageBuffer, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(Error::Data(format!(
                "image sizes differ: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )));
        }
        Ok(ImageBuffer {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        })
    }

    /// `[1, C, H, W]` tensor view of the image.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(&[1, self.channels, self.height, self.width], self.data.clone())
            .expect("image dims are nonzero")
    }

    /// Inverse of [`ImageBuffer::to_tensor`] for a single batch item.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (n, c, h, w) = t.dims4()?;
        if n != 1 {
            return Err(Error::Data(format!("expected one image, got batch of {n}")));
        }
        Self::new(w, h, c, t.data().to_vec())
    }

    /// Loads PNG or BMP. Gray sources give one channel, everything else RGB.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let gray = !img.color().has_color();
        let (w, h) = (img.width() as usize, img.height() as usize);
        if gray {
            let g = img.into_luma8();
            let data = g.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
            Self::new(w, h, 1, data)
        } else {
            let rgb = img.into_rgb8();
            let raw = rgb.into_raw();
            let mut data = vec![0.0; w * h * 3];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * w * h + i] = f64::from(px[c]) / 255.0;
                }
            }
            Self::new(w, h, 3, data)
        }
    }

    /// Writes an 8-bit image; format follows the file extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let n = self.width * self.height;
        let result = if self.channels == 1 {
            let raw: Vec<u8> = self.data.iter().map(|&v| to_u8(v)).collect();
            image::GrayImage::from_raw(w, h, raw).expect("buffer size").save(path)
        } else {
            let mut raw = Vec::with_capacity(n * 3);
            for i in 0..n {
                for c in 0..3 {
                    raw.push(to_u8(self.data[c * n + i]));
                }
            }
            image::RgbImage::from_raw(w, h, raw).expect("buffer size").save(path)
        };
        result.map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Clamp to `[0, 1]` and round to the nearest 8-bit level.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
