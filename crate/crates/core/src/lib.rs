//! Dual-state recurrent networks for single-image super-resolution.
//!
//! The crate carries its own tensor and reverse-mode autodiff core, the
//! single-state and dual-state recurrent models, bicubic data preparation,
//! a momentum-SGD training loop with exact resume, PSNR/SSIM evaluation and
//! the `dsrn` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod dsrn;
pub mod error;
pub mod eval;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod recurrent;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/recurrence.md")]
    mod recurrence {}
    #[doc = include_str!("../../../book/src/dual_state.md")]
    mod dual_state {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
