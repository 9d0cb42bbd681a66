//! Corpus loading and LR/HR training-pair construction.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::augment::{Orientation, SCALE_FACTORS};
use super::{bicubic, color, ImageBuffer};

/// File name looked up under a data root when no manifest is given.
pub const MANIFEST_NAME: &str = "manifest.txt";

/// Relative image paths listed in a manifest, one per line; `#` starts a comment.
pub fn read_manifest(root: &Path, manifest: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| root.join(l))
        .collect())
}

/// Image files under `root` in the manifest order, or sorted PNG/BMP files
/// when there is no manifest.
pub fn list_images(root: &Path, manifest: Option<&Path>) -> Result<Vec<PathBuf>> {
    let default = root.join(MANIFEST_NAME);
    match manifest {
        Some(m) => read_manifest(root, m),
        None if default.is_file() => read_manifest(root, &default),
        None => {
            let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "bmp"))
                })
                .collect();
            paths.sort();
            Ok(paths)
        }
    }
}

/// Luminance images used for training or validation.
#[derive(Debug, Clone)]
pub struct Corpus {
    names: Vec<String>,
    images: Vec<ImageBuffer>,
}

impl Corpus {
    pub fn from_images(names: Vec<String>, images: Vec<ImageBuffer>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Data("corpus is empty".into()));
        }
        if names.len() != images.len() {
            return Err(Error::Data("corpus names and images differ in length".into()));
        }
        let images = images.iter().map(color::luminance).collect();
        Ok(Corpus { names, images })
    }

    pub fn load(root: &Path, manifest: Option<&Path>) -> Result<Self> {
        let paths = list_images(root, manifest)?;
        let mut names = Vec::with_capacity(paths.len());
        let mut images = Vec::with_capacity(paths.len());
        for p in paths {
            images.push(ImageBuffer::load(&p)?);
            names.push(
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            );
        }
        Self::from_images(names, images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn images(&self) -> &[ImageBuffer] {
        &self.images
    }
}

/// One training example on the luminance channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub lr: ImageBuffer,
    pub hr: ImageBuffer,
    /// `bicubic_up(lr)`, cached because the model adds it back at inference.
    pub upsampled: ImageBuffer,
    /// `hr − upsampled`: the regression target.
    pub residual: ImageBuffer,
}

impl SamplePair {
    /// Builds a pair from an HR patch whose sides are multiples of `scale`.
    pub fn from_hr(hr: ImageBuffer, scale: usize) -> Result<Self> {
        let lr = bicubic::downscale(&hr, scale)?;
        let upsampled = bicubic::upscale(&lr, scale)?;
        let residual = hr.zip_map(&upsampled, |h, u| h - u)?;
        Ok(SamplePair {
            lr,
            hr,
            upsampled,
            residual,
        })
    }
}

/// NCHW tensors for a mini-batch of pairs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub lr: Tensor,
    pub hr: Tensor,
    pub upsampled: Tensor,
    pub residual: Tensor,
}

impl Batch {
    pub fn from_pairs(pairs: &[SamplePair]) -> Result<Self> {
        let stack = |f: fn(&SamplePair) -> &ImageBuffer| {
            Tensor::stack(&pairs.iter().map(|p| f(p).to_tensor()).collect::<Vec<_>>())
        };
        Ok(Batch {
            lr: stack(|p| &p.lr)?,
            hr: stack(|p| &p.hr)?,
            upsampled: stack(|p| &p.upsampled)?,
            residual: stack(|p| &p.residual)?,
        })
    }

    pub fn len(&self) -> usize {
        self.lr.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Position of a [`PairSampler`]'s random stream, for checkpointing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerState {
    pub seed: u64,
    pub word_pos: u128,
}

/// Draws augmented random crops from a corpus.
#[derive(Debug)]
pub struct PairSampler {
    corpus: Corpus,
    scale: usize,
    patch: usize,
    batch: usize,
    augment: bool,
    seed: u64,
    rng: ChaCha8Rng,
    rescaled: HashMap<(usize, usize), ImageBuffer>,
}

const MAX_ATTEMPTS: usize = 1000;

impl PairSampler {
    /// `patch` is the HR crop side; it is rounded down to a multiple of `scale`.
    pub fn new(corpus: Corpus, scale: usize, patch: usize, batch: usize, augment: bool, seed: u64) -> Result<Self> {
        if scale == 0 || batch == 0 {
            return Err(Error::Config("scale and batch must be positive".into()));
        }
        let patch = patch - patch % scale;
        if patch == 0 {
            return Err(Error::Config(format!("patch is smaller than scale {scale}")));
        }
        Ok(PairSampler {
            corpus,
            scale,
            patch,
            batch,
            augment,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rescaled: HashMap::new(),
        })
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn state(&self) -> SamplerState {
        SamplerState {
            seed: self.seed,
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(&mut self, state: SamplerState) {
        self.seed = state.seed;
        self.rng = ChaCha8Rng::seed_from_u64(state.seed);
        self.rng.set_word_pos(state.word_pos);
    }

    fn source(&mut self, index: usize, factor_index: usize) -> Result<&ImageBuffer> {
        if !self.rescaled.contains_key(&(index, factor_index)) {
            let img = &self.corpus.images[index];
            let f = SCALE_FACTORS[factor_index];
            let scaled = if f == 1.0 {
                img.clone()
            } else {
                bicubic::rescale(img, f)?
            };
            self.rescaled.insert((index, factor_index), scaled);
        }
        Ok(&self.rescaled[&(index, factor_index)])
    }

    pub fn sample_pair(&mut self) -> Result<SamplePair> {
        let p = self.patch;
        for _ in 0..MAX_ATTEMPTS {
            let index = self.rng.gen_range(0..self.corpus.len());
            let factor_index = if self.augment {
                self.rng.gen_range(0..SCALE_FACTORS.len())
            } else {
                SCALE_FACTORS.len() - 1
            };
            let orientation = if self.augment {
                Orientation::sample(&mut self.rng)
            } else {
                Orientation::IDENTITY
            };
            let (w, h) = {
                let src = self.source(index, factor_index)?;
                (src.width(), src.height())
            };
            if w < p || h < p {
                continue;
            }
            let x = self.rng.gen_range(0..=w - p);
            let y = self.rng.gen_range(0..=h - p);
            let crop = self.source(index, factor_index)?.crop(x, y, p, p)?;
            return SamplePair::from_hr(orientation.apply(&crop), self.scale);
        }
        Err(Error::Data(format!("no corpus image fits a {p}x{p} crop")))
    }

    pub fn next_batch(&mut self) -> Result<Batch> {
        let pairs = (0..self.batch)
            .map(|_| self.sample_pair())
            .collect::<Result<Vec<_>>>()?;
        Batch::from_pairs(&pairs)
    }
}

/// A fixed, unaugmented set of crops for validation.
pub fn fixed_pairs(corpus: &Corpus, scale: usize, patch: usize, count: usize, seed: u64) -> Result<Vec<SamplePair>> {
    let mut sampler = PairSampler::new(corpus.clone(), scale, patch, 1, false, seed)?;
    (0..count).map(|_| sampler.sample_pair()).collect()
}
