//! Benchmark evaluation and the ablation comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::data::{bicubic, color, ImageBuffer};
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim, EvalProtocol};
use crate::model::{Model, ModelKind};
use crate::params::ParamRole;
use crate::train::{load_data, Trainer};

/// What produces the SR luminance from the LR luminance.
#[derive(Debug, Clone, Copy)]
pub enum Upscaler<'a> {
    Bicubic(usize),
    Model(&'a Model),
}

impl Upscaler<'_> {
    pub fn scale(&self) -> usize {
        match self {
            Upscaler::Bicubic(s) => *s,
            Upscaler::Model(m) => m.spec.scale,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Upscaler::Bicubic(_) => "bicubic".into(),
            Upscaler::Model(m) => m.spec.kind.to_string(),
        }
    }

    pub fn upscale(&self, lr: &ImageBuffer) -> Result<ImageBuffer> {
        match self {
            Upscaler::Bicubic(s) => bicubic::upscale(lr, *s),
            Upscaler::Model(m) => m.predict(lr),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub image: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub scale: usize,
    pub protocol: EvalProtocol,
    pub scores: Vec<ImageScore>,
    /// Inputs that could not be read, with the reason.
    pub missing: Vec<(PathBuf, String)>,
}

impl EvalReport {
    pub fn mean_psnr(&self) -> f64 {
        mean(self.scores.iter().map(|s| s.psnr))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.scores.iter().map(|s| s.ssim))
    }

    /// Columns `image,psnr_db,ssim`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,psnr_db,ssim\n");
        for s in &self.scores {
            let _ = writeln!(out, "{},{},{}", s.image, s.psnr, s.ssim);
        }
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Scores one HR image: luminance, crop to a multiple of the scale, bicubic
/// downscale, upscale with `up`, optional quantization, then PSNR/SSIM.
pub fn score_image(hr: &ImageBuffer, up: Upscaler<'_>, protocol: EvalProtocol) -> Result<(f64, f64)> {
    let scale = up.scale();
    let hr = color::luminance(hr).crop_to_multiple(scale)?;
    let lr = bicubic::downscale(&hr, scale)?;
    let mut sr = up.upscale(&lr)?;
    if protocol.quantize {
        sr = sr.quantized();
    }
    Ok((psnr(&sr, &hr, protocol.border)?, ssim(&sr, &hr, protocol.border)?))
}

/// Scores every image in `paths`, in the given order. Unreadable files are
/// recorded in the report and skipped.
pub fn evaluate(paths: &[PathBuf], up: Upscaler<'_>, protocol: EvalProtocol) -> Result<EvalReport> {
    let mut scores = Vec::new();
    let mut missing = Vec::new();
    for p in paths {
        let img = match ImageBuffer::load(p) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", p.display());
                missing.push((p.clone(), e.to_string()));
                continue;
            }
        };
        let (ps, ss) = score_image(&img, up, protocol)?;
        scores.push(ImageScore {
            image: p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            psnr: ps,
            ssim: ss,
        });
    }
    Ok(EvalReport {
        method: up.label(),
        scale: up.scale(),
        protocol,
        scores,
        missing,
    })
}

/// Text table in the `dataset | scale | method PSNR/SSIM …` layout.
pub fn format_table(dataset: &str, reports: &[EvalReport]) -> String {
    let mut out = String::new();
    if let Some(r) = reports.first() {
        let _ = writeln!(out, "# {}", r.protocol.describe());
    }
    let _ = write!(out, "{:<10} {:<6}", "Dataset", "Scale");
    for r in reports {
        let _ = write!(out, " {:>16}", r.method);
    }
    out.push('\n');
    let mut scales: Vec<usize> = reports.iter().map(|r| r.scale).collect();
    scales.sort_unstable();
    scales.dedup();
    for s in scales {
        let _ = write!(out, "{:<10} {:<6}", dataset, format!("x{s}"));
        for r in reports {
            if r.scale == s {
                let _ = write!(out, " {:>16}", format!("{:.2}/{:.4}", r.mean_psnr(), r.mean_ssim()));
            } else {
                let _ = write!(out, " {:>16}", "-");
            }
        }
        out.push('\n');
    }
    out
}

/// The four configurations compared by the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationVariant {
    SingleState,
    NoFeedback,
    Dsrn,
    Untied,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::SingleState,
        AblationVariant::NoFeedback,
        AblationVariant::Dsrn,
        AblationVariant::Untied,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::SingleState => "single-state",
            AblationVariant::NoFeedback => "dsrn-no-feedback",
            AblationVariant::Dsrn => "dsrn",
            AblationVariant::Untied => "dsrn-untied",
        }
    }

    /// `base` with the model fields replaced for this variant. The single
    /// state baseline is the residual-block recurrence at the same width
    /// and unrolling length.
    pub fn configure(self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        cfg.model = ModelKind::Dsrn;
        cfg.feedback = true;
        cfg.tied = true;
        match self {
            AblationVariant::SingleState => cfg.model = ModelKind::Resnet,
            AblationVariant::NoFeedback => cfg.feedback = false,
            AblationVariant::Dsrn => {}
            AblationVariant::Untied => cfg.tied = false,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub shared_params: usize,
    pub per_step_params: usize,
    /// Final validation PSNR for each seed, per scale.
    pub psnr: Vec<(usize, Vec<f64>)>,
}

impl AblationRow {
    pub fn mean_psnr(&self, scale: usize) -> Option<f64> {
        self.psnr
            .iter()
            .find(|(s, _)| *s == scale)
            .map(|(_, v)| mean(v.iter().copied()))
    }
}

/// Trains every variant for every seed and scale with identical budgets.
pub fn ablation_run(base: &RunConfig, seeds: &[u64], scales: &[usize]) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() || scales.is_empty() {
        return Err(Error::Config("ablation needs at least one seed and one scale".into()));
    }
    let mut rows = Vec::new();
    for v in AblationVariant::ALL {
        let mut counts = None;
        let mut psnr = Vec::new();
        for &scale in scales {
            let mut per_seed = Vec::new();
            for &seed in seeds {
                let mut cfg = v.configure(base);
                cfg.scale = scale;
                cfg.seed = seed;
                let (corpus, val) = load_data(&cfg)?;
                let mut trainer = Trainer::new(cfg, corpus, val)?;
                let report = trainer.run(None)?;
                log::info!("{} x{scale} seed {seed}: {:.3} dB", v.name(), report.last.psnr);
                per_seed.push(report.last.psnr);
                let p = &trainer.model.params;
                counts.get_or_insert((p.count_by_role(ParamRole::Shared), p.count_by_role(ParamRole::PerStep)));
            }
            psnr.push((scale, per_seed));
        }
        let (shared_params, per_step_params) = counts.expect("at least one run");
        rows.push(AblationRow {
            variant: v,
            shared_params,
            per_step_params,
            psnr,
        });
    }
    Ok(rows)
}

pub fn format_ablation(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let scales: Vec<usize> = rows
        .first()
        .map(|r| r.psnr.iter().map(|(s, _)| *s).collect())
        .unwrap_or_default();
    let _ = write!(out, "{:<18} {:>10} {:>9}", "variant", "shared", "per-step");
    for s in &scales {
        let _ = write!(out, " {:>10}", format!("x{s} PSNR"));
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{:<18} {:>10} {:>9}",
            r.variant.name(),
            r.shared_params,
            r.per_step_params
        );
        for &s in &scales {
            let _ = write!(out, " {:>10.3}", r.mean_psnr(s).unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

/// Paths of a benchmark directory: manifest order, else sorted PNG/BMP.
pub fn benchmark_paths(root: &Path) -> Result<Vec<PathBuf>> {
    crate::data::pairs::list_images(root, None)
}
