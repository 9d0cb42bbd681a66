//! Image I/O, color handling, resampling, augmentation and pair construction.

pub mod augment;
pub mod bicubic;
pub mod color;
mod image;
pub mod pairs;
pub mod synthetic;

pub use self::image::{to_u8, ImageBuffer};
pub use pairs::{Batch, Corpus, PairSampler, SamplePair};
