//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file is a valid configuration. Unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::optim::ClipMode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub scale: usize,
    pub steps_unrolled: usize,
    pub width_in: usize,
    pub width: usize,
    pub feedback: bool,
    pub tied: bool,

    pub lr0: f64,
    pub momentum: f64,
    pub clip: f64,
    pub clip_mode: ClipMode,
    pub batch: usize,
    /// HR crop side.
    pub patch: usize,
    pub augment: bool,
    /// Number of optimizer updates.
    pub iterations: usize,

    pub val_every: usize,
    pub val_count: usize,
    pub val_patch: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub max_decays: usize,
    pub decay_factor: f64,

    pub seed: u64,
    pub data_root: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub val_root: Option<PathBuf>,
    /// Use this many generated images instead of reading `data_root`.
    pub toy_images: usize,
    pub toy_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Dsrn,
            scale: 2,
            steps_unrolled: 7,
            width_in: 64,
            width: 128,
            feedback: true,
            tied: true,
            lr0: 0.01,
            momentum: 0.95,
            clip: 0.5,
            clip_mode: ClipMode::Value,
            batch: 16,
            patch: 128,
            augment: true,
            iterations: 10_000,
            val_every: 500,
            val_count: 16,
            val_patch: 128,
            patience: 3,
            min_delta: 1e-5,
            max_decays: 3,
            decay_factor: 10.0,
            seed: 0,
            data_root: None,
            manifest: None,
            val_root: None,
            toy_images: 0,
            toy_size: 96,
        }
    }
}

/// Keys in the order they are written out.
pub const KEYS: &[&str] = &[
    "model",
    "scale",
    "T",
    "width_in",
    "width",
    "feedback",
    "tied",
    "lr0",
    "momentum",
    "clip",
    "clip_mode",
    "batch",
    "patch",
    "augment",
    "iterations",
    "val_every",
    "val_count",
    "val_patch",
    "patience",
    "min_delta",
    "max_decays",
    "decay_factor",
    "seed",
    "data_root",
    "manifest",
    "val_root",
    "toy_images",
    "toy_size",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = value.parse()?,
            "scale" => self.scale = parse(key, value)?,
            "T" => self.steps_unrolled = parse(key, value)?,
            "width_in" => self.width_in = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "feedback" => self.feedback = parse(key, value)?,
            "tied" => self.tied = parse(key, value)?,
            "lr0" => self.lr0 = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "clip_mode" => self.clip_mode = value.parse()?,
            "batch" => self.batch = parse(key, value)?,
            "patch" => self.patch = parse(key, value)?,
            "augment" => self.augment = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "val_every" => self.val_every = parse(key, value)?,
            "val_count" => self.val_count = parse(key, value)?,
            "val_patch" => self.val_patch = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "min_delta" => self.min_delta = parse(key, value)?,
            "max_decays" => self.max_decays = parse(key, value)?,
            "decay_factor" => self.decay_factor = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "data_root" => self.data_root = path(value),
            "manifest" => self.manifest = path(value),
            "val_root" => self.val_root = path(value),
            "toy_images" => self.toy_images = parse(key, value)?,
            "toy_size" => self.toy_size = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "model" => self.model.to_string(),
            "scale" => self.scale.to_string(),
            "T" => self.steps_unrolled.to_string(),
            "width_in" => self.width_in.to_string(),
            "width" => self.width.to_string(),
            "feedback" => self.feedback.to_string(),
            "tied" => self.tied.to_string(),
            "lr0" => self.lr0.to_string(),
            "momentum" => self.momentum.to_string(),
            "clip" => self.clip.to_string(),
            "clip_mode" => self.clip_mode.to_string(),
            "batch" => self.batch.to_string(),
            "patch" => self.patch.to_string(),
            "augment" => self.augment.to_string(),
            "iterations" => self.iterations.to_string(),
            "val_every" => self.val_every.to_string(),
            "val_count" => self.val_count.to_string(),
            "val_patch" => self.val_patch.to_string(),
            "patience" => self.patience.to_string(),
            "min_delta" => self.min_delta.to_string(),
            "max_decays" => self.max_decays.to_string(),
            "decay_factor" => self.decay_factor.to_string(),
            "seed" => self.seed.to_string(),
            "data_root" => show_path(&self.data_root),
            "manifest" => show_path(&self.manifest),
            "val_root" => show_path(&self.val_root),
            "toy_images" => self.toy_images.to_string(),
            "toy_size" => self.toy_size.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("scale", self.scale),
            ("T", self.steps_unrolled),
            ("width_in", self.width_in),
            ("width", self.width),
            ("batch", self.batch),
            ("patch", self.patch),
            ("val_every", self.val_every),
            ("val_count", self.val_count),
            ("val_patch", self.val_patch),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config("`lr0` must be a positive number".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("`momentum` must lie in [0, 1)".into()));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::Config("`clip` must be positive".into()));
        }
        if self.decay_factor.is_nan() || self.decay_factor <= 1.0 {
            return Err(Error::Config("`decay_factor` must exceed 1".into()));
        }
        if self.patch < self.scale || self.val_patch < self.scale {
            return Err(Error::Config("`patch` and `val_patch` must be at least `scale`".into()));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model,
            scale: self.scale,
            steps: self.steps_unrolled,
            width_in: self.width_in,
            width: self.width,
            feedback: self.feedback,
            tied: self.tied,
        }
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|&k| (k, self.get(k).expect("listed key"))).collect()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
