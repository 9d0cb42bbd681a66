//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, configuration, data or checkpoint
//! problems, 3 numeric failure during training.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{write_atomic, Checkpoint};
use crate::config::RunConfig;
use crate::data::synthetic::write_toy_corpus;
use crate::data::{bicubic, color, ImageBuffer};
use crate::dsrn::energy_maps;
use crate::error::{Error, Result};
use crate::eval::{ablation_run, benchmark_paths, evaluate, format_ablation, format_table, Upscaler};
use crate::metrics::EvalProtocol;
use crate::model::Model;
use crate::tensor::Graph;
use crate::train::{config_from_checkpoint, Trainer};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dsrn",
    version,
    about = "Recurrent super-resolution: train, evaluate, upscale"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory of training or benchmark images.
    #[arg(long, global = true)]
    pub data_root: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub scale: Option<usize>,
    /// Unrolling length.
    #[arg(long = "T", id = "steps")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub width_in: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    /// Generate this many toy images instead of reading `--data-root`.
    #[arg(long)]
    pub toy_images: Option<usize>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Continue from a `last.ckpt` written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint, or plain bicubic, on a benchmark directory.
    Eval {
        #[arg(long, conflicts_with = "bicubic")]
        checkpoint: Option<PathBuf>,
        /// Evaluate bicubic upscaling instead of a model.
        #[arg(long, requires = "scale")]
        bicubic: bool,
        #[arg(long)]
        scale: Option<usize>,
        /// Pixels cropped from each side before scoring; defaults to the scale.
        #[arg(long)]
        border: Option<usize>,
        /// Score unquantized output.
        #[arg(long)]
        no_quantize: bool,
        /// Dataset label in the table.
        #[arg(long, default_value = "dataset")]
        name: String,
    },
    /// Super-resolve one image.
    Sr {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Expected scale; must match the checkpoint.
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Compare single-state, no-feedback, tied and untied models.
    Ablate {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Comma-separated scales; defaults to the configured scale.
        #[arg(long, value_delimiter = ',')]
        scales: Vec<usize>,
    },
    /// Write per-step HR state energy maps of a DSRN checkpoint.
    Viz {
        #[arg(long)]
        checkpoint: PathBuf,
        /// LR input image.
        #[arg(long)]
        image: PathBuf,
    },
    /// Write a procedural toy corpus.
    Toy {
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 96)]
        size: usize,
    },
}

/// Parses `args` and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_CONFIG })
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Train { overrides, resume } => cmd_train(c, overrides, resume.as_deref()),
        Command::Eval {
            checkpoint,
            bicubic,
            scale,
            border,
            no_quantize,
            name,
        } => cmd_eval(c, checkpoint.as_deref(), *bicubic, *scale, *border, !no_quantize, name),
        Command::Sr {
            checkpoint,
            input,
            output,
            scale,
        } => cmd_sr(checkpoint, input, output, *scale),
        Command::Ablate {
            overrides,
            seeds,
            scales,
        } => cmd_ablate(c, overrides, seeds, scales),
        Command::Viz { checkpoint, image } => cmd_viz(c, checkpoint, image),
        Command::Toy { count, size } => {
            let out = c.out.as_deref().unwrap_or(Path::new("toy"));
            write_toy_corpus(out, *count, *size, c.seed.unwrap_or(0))
        }
    }
}

/// Config file, then `--set` pairs, then dedicated flags; later wins.
pub fn resolve_config(c: &Common, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &o.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {kv}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(m) = &o.model {
        cfg.set("model", m)?;
    }
    let flags = [
        ("scale", o.scale),
        ("T", o.steps),
        ("width", o.width),
        ("width_in", o.width_in),
        ("iterations", o.iterations),
        ("batch", o.batch),
        ("patch", o.patch),
        ("toy_images", o.toy_images),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v.to_string())?;
        }
    }
    if let Some(lr) = o.lr0 {
        cfg.lr0 = lr;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.data_root {
        cfg.data_root = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(c: &Common, o: &Overrides, resume: Option<&Path>) -> Result<()> {
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    let (cfg, ck) = match resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let mut cfg = config_from_checkpoint(&ck)?;
            // only the budget may change on resume
            if let Some(n) = o.iterations {
                cfg.iterations = n;
            }
            (cfg, Some(ck))
        }
        None => (resolve_config(c, o)?, None),
    };
    write_atomic(&out.join("config.txt"), cfg.to_string().as_bytes())?;
    let mut trainer = Trainer::from_config(cfg)?;
    if let Some(ck) = &ck {
        trainer.resume(ck)?;
    }
    let report = trainer.run(Some(&out))?;
    println!(
        "trained {} iterations, lr {:e}, best validation PSNR {:.3} dB",
        report.iterations, report.lr, report.best_val_psnr
    );
    Ok(())
}

fn cmd_eval(
    c: &Common,
    checkpoint: Option<&Path>,
    use_bicubic: bool,
    scale: Option<usize>,
    border: Option<usize>,
    quantize: bool,
    name: &str,
) -> Result<()> {
    let root = c
        .data_root
        .as_deref()
        .ok_or_else(|| Error::Config("eval needs --data-root".into()))?;
    let model = match checkpoint {
        Some(p) => Some(Model::from_checkpoint(&Checkpoint::load(p)?)?),
        None if use_bicubic => None,
        None => return Err(Error::Config("eval needs --checkpoint or --bicubic".into())),
    };
    let up = match &model {
        Some(m) => {
            if let Some(s) = scale.filter(|&s| s != m.spec.scale) {
                return Err(Error::Config(format!(
                    "checkpoint scale {} differs from --scale {s}",
                    m.spec.scale
                )));
            }
            Upscaler::Model(m)
        }
        None => Upscaler::Bicubic(scale.expect("clap requires --scale")),
    };
    let protocol = EvalProtocol {
        border: border.unwrap_or(up.scale()),
        quantize,
    };
    let paths = benchmark_paths(root)?;
    let report = evaluate(&paths, up, protocol)?;
    for (p, why) in &report.missing {
        eprintln!("missing: {} ({why})", p.display());
    }
    let table = format_table(name, std::slice::from_ref(&report));
    print!("{table}");
    if let Some(out) = &c.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_atomic(&out.join("eval.csv"), report.to_csv().as_bytes())?;
        write_atomic(&out.join("table.txt"), table.as_bytes())?;
    }
    Ok(())
}

/// Model on luminance, bicubic on chroma for colour inputs.
pub fn super_resolve(model: &Model, input: &ImageBuffer) -> Result<ImageBuffer> {
    let s = model.spec.scale;
    if input.channels() == 1 {
        return model.predict(input);
    }
    let ycc = color::rgb_to_ycbcr(input)?;
    let y = model.predict(&ycc.channel(0))?;
    let cb = bicubic::upscale(&ycc.channel(1), s)?;
    let cr = bicubic::upscale(&ycc.channel(2), s)?;
    let rgb = color::ycbcr_to_rgb(&ImageBuffer::from_planes(&[y, cb, cr])?)?;
    Ok(rgb.map(|v| v.clamp(0.0, 1.0)))
}

fn cmd_sr(checkpoint: &Path, input: &Path, output: &Path, scale: Option<usize>) -> Result<()> {
    let model = Model::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    if let Some(s) = scale.filter(|&s| s != model.spec.scale) {
        return Err(Error::Config(format!(
            "checkpoint is for scale {}, requested {s}",
            model.spec.scale
        )));
    }
    let img = ImageBuffer::load(input)?;
    let sr = super_resolve(&model, &img)?;
    sr.save(output)
}

fn cmd_ablate(c: &Common, o: &Overrides, seeds: &[u64], scales: &[usize]) -> Result<()> {
    let base = resolve_config(c, o)?;
    let scales = if scales.is_empty() {
        vec![base.scale]
    } else {
        scales.to_vec()
    };
    let rows = ablation_run(&base, seeds, &scales)?;
    let table = format_ablation(&rows);
    print!("{table}");
    if let Some(out) = &c.out {
        write_atomic(&out.join("ablation.txt"), table.as_bytes())?;
    }
    Ok(())
}

fn cmd_viz(c: &Common, checkpoint: &Path, image: &Path) -> Result<()> {
    let model = Model::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    let net = model.dsrn().ok_or_else(|| {
        Error::Config(format!(
            "{} is a {} checkpoint, not dsrn",
            checkpoint.display(),
            model.spec.kind
        ))
    })?;
    let lr = color::luminance(&ImageBuffer::load(image)?);
    let mut g = Graph::new();
    let trace = net.forward(&mut g, &model.params, &lr.to_tensor())?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("states"));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    for (t, map) in energy_maps(&g, &trace)?.iter().enumerate() {
        ImageBuffer::from_tensor(map)?.save(&out.join(format!("energy_t{:02}.png", t + 1)))?;
    }
    Ok(())
}
