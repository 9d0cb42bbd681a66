//! The training loop: sampling, clipped momentum updates, periodic
//! validation with plateau decay, checkpointing and resume.
//!
//! A run directory holds
//!
//! ```text
//! log.csv                  step,lr,train_loss,val_psnr
//! last.ckpt(.manifest)     state after the latest validation
//! best.ckpt(.manifest)     state with the highest validation PSNR
//! ```
//!
//! Checkpoints carry the optimizer velocities, the schedule and the sampler
//! position, so a resumed run continues exactly where the original left off.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::checkpoint::{Checkpoint, Manifest};
use crate::config::RunConfig;
use crate::data::pairs::{fixed_pairs, SamplerState};
use crate::data::synthetic::toy_corpus;
use crate::data::{Batch, Corpus, ImageBuffer, PairSampler, SamplePair};
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::model::Model;
use crate::optim::{clip_gradients, Plateau, SgdMomentum};
use crate::tensor::Graph;

pub const LOG_NAME: &str = "log.csv";
pub const LAST_NAME: &str = "last.ckpt";
pub const BEST_NAME: &str = "best.ckpt";
pub const LOG_HEADER: &str = "step,lr,train_loss,val_psnr";

const VELOCITY_PREFIX: &str = "velocity/";
const CONFIG_PREFIX: &str = "config.";
const VAL_SEED_OFFSET: u64 = 0x5eed;

/// Training and validation data described by a configuration.
pub fn load_data(cfg: &RunConfig) -> Result<(Corpus, Vec<SamplePair>)> {
    let train = if cfg.toy_images > 0 {
        let images = toy_corpus(cfg.toy_images, cfg.toy_size, cfg.seed);
        let names = (0..images.len()).map(|i| format!("toy_{i:03}")).collect();
        Corpus::from_images(names, images)?
    } else {
        let root = cfg
            .data_root
            .as_deref()
            .ok_or_else(|| Error::Config("no `data_root` given and `toy_images` is 0".into()))?;
        Corpus::load(root, cfg.manifest.as_deref())?
    };
    let val_corpus = match &cfg.val_root {
        Some(root) => Corpus::load(root, None)?,
        None => train.clone(),
    };
    let val = fixed_pairs(
        &val_corpus,
        cfg.scale,
        cfg.val_patch,
        cfg.val_count,
        cfg.seed.wrapping_add(VAL_SEED_OFFSET),
    )?;
    Ok((train, val))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    /// Mean residual loss.
    pub loss: f64,
    /// Mean PSNR of `bicubic + prediction` against HR, border crop = scale.
    pub psnr: f64,
}

/// One row of `log.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub lr: f64,
    /// Mean training loss since the previous row.
    pub train_loss: f64,
    pub val_psnr: f64,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        format!("{},{:e},{:e},{}", self.step, self.lr, self.train_loss, self.val_psnr)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub iterations: usize,
    pub lr: f64,
    pub best_val_psnr: f64,
    pub last: Validation,
    pub rows: Vec<LogRow>,
}

#[derive(Debug)]
pub struct Trainer {
    pub cfg: RunConfig,
    pub model: Model,
    pub optimizer: SgdMomentum,
    pub schedule: Plateau,
    sampler: PairSampler,
    val: Vec<SamplePair>,
    val_batch: Batch,
    /// Completed optimizer updates.
    pub iteration: usize,
    pub best_val_psnr: f64,
    loss_sum: f64,
    loss_count: usize,
    pub rows: Vec<LogRow>,
}

impl Trainer {
    pub fn new(cfg: RunConfig, corpus: Corpus, val: Vec<SamplePair>) -> Result<Self> {
        cfg.validate()?;
        if val.is_empty() {
            return Err(Error::Data("validation set is empty".into()));
        }
        let model = Model::new(cfg.model_spec(), cfg.seed)?;
        let optimizer = SgdMomentum::new(&model.params, cfg.momentum);
        let schedule = Plateau::new(cfg.lr0, cfg.decay_factor, cfg.max_decays, cfg.patience, cfg.min_delta);
        let sampler = PairSampler::new(corpus, cfg.scale, cfg.patch, cfg.batch, cfg.augment, cfg.seed)?;
        let val_batch = Batch::from_pairs(&val)?;
        Ok(Trainer {
            cfg,
            model,
            optimizer,
            schedule,
            sampler,
            val,
            val_batch,
            iteration: 0,
            best_val_psnr: f64::NEG_INFINITY,
            loss_sum: 0.0,
            loss_count: 0,
            rows: Vec::new(),
        })
    }

    pub fn from_config(cfg: RunConfig) -> Result<Self> {
        let (corpus, val) = load_data(&cfg)?;
        Self::new(cfg, corpus, val)
    }

    /// Loss of the current parameters on the next batch, without updating.
    pub fn batch_loss(&self, batch: &Batch) -> Result<f64> {
        let mut g = Graph::new();
        let (loss, _) = self.model.loss(&mut g, &batch.lr, &batch.hr, &batch.upsampled)?;
        Ok(g.value(loss).data()[0])
    }

    /// Draws a batch, backpropagates, clips and updates. Returns the loss
    /// before the update.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.sampler.next_batch()?;
        let mut g = Graph::new();
        let it = self.iteration;
        let (loss, _) = self
            .model
            .loss(&mut g, &batch.lr, &batch.hr, &batch.upsampled)
            .map_err(|e| tag_iteration(e, it))?;
        let value = g.value(loss).data()[0];
        g.backward_into(loss, &mut self.model.params)
            .map_err(|e| tag_iteration(e, it))?;
        clip_gradients(&mut self.model.params, self.cfg.clip_mode, self.cfg.clip);
        self.optimizer
            .step(&mut self.model.params, self.schedule.lr, self.iteration)?;
        self.model.post_step();
        self.iteration += 1;
        self.loss_sum += value;
        self.loss_count += 1;
        Ok(value)
    }

    pub fn validate(&self) -> Result<Validation> {
        let b = &self.val_batch;
        let mut g = Graph::new();
        let (loss, trace) = self.model.loss(&mut g, &b.lr, &b.hr, &b.upsampled)?;
        let pred = g.value(trace.prediction());
        let mut total = 0.0;
        for (i, pair) in self.val.iter().enumerate() {
            let r = ImageBuffer::from_tensor(&pred.batch_item(i)?)?;
            let sr = pair.upsampled.zip_map(&r, |u, r| u + r)?;
            total += psnr(&sr, &pair.hr, self.cfg.scale)?;
        }
        Ok(Validation {
            loss: g.value(loss).data()[0],
            psnr: total / self.val.len() as f64,
        })
    }

    /// Validates, updates the schedule and appends a log row.
    fn checkpoint_round(&mut self) -> Result<(LogRow, bool)> {
        let v = self.validate()?;
        let train_loss = if self.loss_count > 0 {
            self.loss_sum / self.loss_count as f64
        } else {
            f64::NAN
        };
        let row = LogRow {
            step: self.iteration,
            lr: self.schedule.lr,
            train_loss,
            val_psnr: v.psnr,
        };
        self.schedule.observe(v.loss);
        self.loss_sum = 0.0;
        self.loss_count = 0;
        let improved = v.psnr > self.best_val_psnr;
        if improved {
            self.best_val_psnr = v.psnr;
        }
        self.rows.push(row);
        Ok((row, improved))
    }

    /// Full state as a checkpoint: parameters, velocities, schedule, sampler.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = self.model.to_checkpoint();
        for ((_, name, _), v) in self.model.params.iter().zip(&self.optimizer.velocity) {
            ck.records.insert(format!("{VELOCITY_PREFIX}{name}"), v.clone());
        }
        let m = &mut ck.manifest;
        for (k, v) in self.cfg.entries() {
            m.insert(format!("{CONFIG_PREFIX}{k}"), v);
        }
        let s = &self.schedule;
        let st = self.sampler.state();
        let pairs: [(&str, String); 10] = [
            ("iteration", self.iteration.to_string()),
            ("lr", s.lr.to_string()),
            ("decays", s.decays.to_string()),
            ("best_val_loss", s.best.to_string()),
            ("stale", s.stale.to_string()),
            ("best_val_psnr", self.best_val_psnr.to_string()),
            ("loss_sum", self.loss_sum.to_string()),
            ("loss_count", self.loss_count.to_string()),
            ("sampler_seed", st.seed.to_string()),
            ("sampler_word_pos", st.word_pos.to_string()),
        ];
        for (k, v) in pairs {
            m.insert(k.into(), v);
        }
        ck
    }

    /// Restores a state written by [`Trainer::to_checkpoint`].
    pub fn resume(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.load_params(&mut self.model.params)?;
        let mut velocity = Vec::with_capacity(self.optimizer.velocity.len());
        for (_, name, value) in self.model.params.iter() {
            let key = format!("{VELOCITY_PREFIX}{name}");
            let v = ck
                .records
                .get(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing record `{key}`")))?;
            if v.shape() != value.shape() {
                return Err(Error::Checkpoint(format!("record `{key}` has the wrong shape")));
            }
            velocity.push(v.clone());
        }
        self.optimizer.velocity = velocity;
        let m = &ck.manifest;
        self.iteration = field(m, "iteration")?;
        self.schedule.lr = field(m, "lr")?;
        self.schedule.decays = field(m, "decays")?;
        self.schedule.best = field(m, "best_val_loss")?;
        self.schedule.stale = field(m, "stale")?;
        self.best_val_psnr = field(m, "best_val_psnr")?;
        self.loss_sum = field(m, "loss_sum")?;
        self.loss_count = field(m, "loss_count")?;
        self.sampler.restore(SamplerState {
            seed: field(m, "sampler_seed")?,
            word_pos: field(m, "sampler_word_pos")?,
        });
        Ok(())
    }

    /// Trains until `cfg.iterations` updates are done. With `out`, writes the
    /// log and checkpoints there; on a numeric failure the last good state
    /// is saved before the error is returned.
    pub fn run(&mut self, out: Option<&Path>) -> Result<TrainReport> {
        let mut log = match out {
            Some(dir) => Some(RunLog::open(dir, self.iteration == 0)?),
            None => None,
        };
        while self.iteration < self.cfg.iterations {
            if let Err(e) = self.train_step() {
                if e.is_numeric() {
                    if let Some(dir) = out {
                        self.to_checkpoint().save(&dir.join(LAST_NAME))?;
                    }
                }
                return Err(e);
            }
            if self.iteration.is_multiple_of(self.cfg.val_every) || self.iteration == self.cfg.iterations {
                let (row, improved) = self.checkpoint_round()?;
                if let (Some(dir), Some(log)) = (out, log.as_mut()) {
                    log.append(&row)?;
                    let ck = self.to_checkpoint();
                    ck.save(&dir.join(LAST_NAME))?;
                    if improved {
                        ck.save(&dir.join(BEST_NAME))?;
                    }
                }
                log::info!(
                    "step {} lr {:e} train_loss {:.6e} val_psnr {:.3}",
                    row.step,
                    row.lr,
                    row.train_loss,
                    row.val_psnr
                );
            }
        }
        let last_val = self.validate()?;
        Ok(TrainReport {
            iterations: self.iteration,
            lr: self.schedule.lr,
            best_val_psnr: self.best_val_psnr.max(last_val.psnr),
            last: last_val,
            rows: self.rows.clone(),
        })
    }
}

fn tag_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::NonFinite { op, step } => Error::NonFinite {
            op: match step {
                Some(s) => format!("{op} (unrolling step {s})"),
                None => op,
            },
            step: Some(iteration),
        },
        other => other,
    }
}

fn field<T: std::str::FromStr>(m: &Manifest, key: &str) -> Result<T> {
    let v = m
        .get(key)
        .ok_or_else(|| Error::Checkpoint(format!("manifest has no `{key}`")))?;
    v.parse()
        .map_err(|_| Error::Checkpoint(format!("manifest `{key}` has invalid value `{v}`")))
}

/// The run configuration stored in a training checkpoint.
pub fn config_from_checkpoint(ck: &Checkpoint) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (k, v) in &ck.manifest {
        if let Some(key) = k.strip_prefix(CONFIG_PREFIX) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

struct RunLog {
    path: PathBuf,
}

impl RunLog {
    fn open(dir: &Path, fresh: bool) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOG_NAME);
        if fresh || !path.exists() {
            fs::write(&path, format!("{LOG_HEADER}\n")).map_err(|e| Error::io(&path, e))?;
        }
        Ok(RunLog { path })
    }

    fn append(&mut self, row: &LogRow) -> Result<()> {
        let mut f = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        writeln!(f, "{}", row.to_csv()).map_err(|e| Error::io(&self.path, e))
    }
}
