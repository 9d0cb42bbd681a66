//! One handle over every model family, with checkpoint round trips.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, Manifest};
use crate::data::{bicubic, ImageBuffer};
use crate::dsrn::{dsrn_loss, DsrnNet, DsrnSpec, DsrnTrace, EMBEDDING_TAG};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::recurrent::{SingleStateNet, UnrolledTrace, Variant};
use crate::tensor::{Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Resnet,
    Drcn,
    Drrn,
    Dsrn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Resnet, ModelKind::Drcn, ModelKind::Drrn, ModelKind::Dsrn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Resnet => "resnet",
            ModelKind::Drcn => "drcn",
            ModelKind::Drrn => "drrn",
            ModelKind::Dsrn => "dsrn",
        }
    }

    fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::Resnet => Some(Variant::Resnet),
            ModelKind::Drcn => Some(Variant::Drcn),
            ModelKind::Drrn => Some(Variant::Drrn),
            ModelKind::Dsrn => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (expected resnet, drcn, drrn or dsrn)")))
    }
}

/// Architecture hyperparameters shared by all families.
///
/// Single-state models use `width` as their channel count and ignore
/// `width_in`, `feedback` and `tied`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub scale: usize,
    pub steps: usize,
    pub width_in: usize,
    pub width: usize,
    pub feedback: bool,
    pub tied: bool,
}

impl ModelSpec {
    pub fn dsrn(scale: usize, steps: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Dsrn,
            scale,
            steps,
            width_in: 64,
            width: 128,
            feedback: true,
            tied: true,
        }
    }

    pub fn dsrn_spec(&self) -> DsrnSpec {
        DsrnSpec {
            scale: self.scale,
            steps: self.steps,
            width_in: self.width_in,
            width: self.width,
            feedback: self.feedback,
            tied: self.tied,
        }
    }

    pub fn to_manifest(&self, m: &mut Manifest) {
        m.insert("model".into(), self.kind.to_string());
        m.insert("scale".into(), self.scale.to_string());
        m.insert("T".into(), self.steps.to_string());
        m.insert("width_in".into(), self.width_in.to_string());
        m.insert("width".into(), self.width.to_string());
        m.insert("feedback".into(), self.feedback.to_string());
        m.insert("tied".into(), self.tied.to_string());
        if self.kind == ModelKind::Dsrn {
            m.insert("embedding".into(), EMBEDDING_TAG.into());
        }
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        fn field<T: FromStr>(m: &Manifest, key: &str) -> Result<T> {
            let v = m
                .get(key)
                .ok_or_else(|| Error::Checkpoint(format!("manifest has no `{key}`")))?;
            v.parse()
                .map_err(|_| Error::Checkpoint(format!("manifest `{key}` has invalid value `{v}`")))
        }
        let kind: ModelKind = m
            .get("model")
            .ok_or_else(|| Error::Checkpoint("manifest has no `model`".into()))?
            .parse()?;
        if kind == ModelKind::Dsrn {
            if let Some(tag) = m.get("embedding") {
                if tag != EMBEDDING_TAG {
                    return Err(Error::Checkpoint(format!("unsupported embedding `{tag}`")));
                }
            }
        }
        Ok(ModelSpec {
            kind,
            scale: field(m, "scale")?,
            steps: field(m, "T")?,
            width_in: field(m, "width_in")?,
            width: field(m, "width")?,
            feedback: field(m, "feedback")?,
            tied: field(m, "tied")?,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Arch {
    Single(SingleStateNet),
    Dual(DsrnNet),
}

#[derive(Debug, Clone)]
pub enum Trace {
    Single(UnrolledTrace),
    Dual(DsrnTrace),
}

impl Trace {
    pub fn prediction(&self) -> Var {
        match self {
            Trace::Single(t) => t.prediction,
            Trace::Dual(t) => t.prediction,
        }
    }

    pub fn input(&self) -> Var {
        match self {
            Trace::Single(t) => t.input,
            Trace::Dual(t) => t.input,
        }
    }
}

/// Shifts `[0, 1]` intensities to `[−½, ½]` before they enter a network.
fn centered(x: &Tensor) -> Tensor {
    x.map(|v| v - 0.5)
}

/// A network together with its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub arch: Arch,
    pub params: ParamStore,
}

impl Model {
    /// Fresh model with weights drawn from a generator seeded by `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        if spec.scale == 0 {
            return Err(Error::Config("scale must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let arch = match spec.kind.variant() {
            Some(v) => Arch::Single(SingleStateNet::new(&mut params, v, spec.steps, spec.width, &mut rng)?),
            None => Arch::Dual(DsrnNet::new(&mut params, spec.dsrn_spec(), &mut rng)?),
        };
        Ok(Model { spec, arch, params })
    }

    /// Runs the network. Single-state models read `upsampled`, DSRN reads `lr`.
    pub fn forward(&self, g: &mut Graph, lr: &Tensor, upsampled: &Tensor) -> Result<Trace> {
        match &self.arch {
            Arch::Single(net) => Ok(Trace::Single(net.forward(g, &self.params, &centered(upsampled))?)),
            Arch::Dual(net) => Ok(Trace::Dual(net.forward(g, &self.params, &centered(lr))?)),
        }
    }

    /// Builds the graph through the residual loss and returns `(loss, trace)`.
    pub fn loss(&self, g: &mut Graph, lr: &Tensor, hr: &Tensor, upsampled: &Tensor) -> Result<(Var, Trace)> {
        let trace = self.forward(g, lr, upsampled)?;
        let loss = dsrn_loss(g, trace.prediction(), hr, upsampled)?;
        Ok((loss, trace))
    }

    /// Super-resolves one luminance image: `bicubic_up(lr) + residual`.
    pub fn predict(&self, lr: &ImageBuffer) -> Result<ImageBuffer> {
        if lr.channels() != 1 {
            return Err(Error::Data(format!("expected one channel, got {}", lr.channels())));
        }
        let up = bicubic::upscale(lr, self.spec.scale)?;
        let mut g = Graph::new();
        let trace = self.forward(&mut g, &lr.to_tensor(), &up.to_tensor())?;
        let residual = ImageBuffer::from_tensor(g.value(trace.prediction()))?;
        up.zip_map(&residual, |u, r| u + r)
    }

    /// Hook run after every optimizer update.
    pub fn post_step(&mut self) {
        if let Arch::Single(net) = &self.arch {
            net.normalize_combination(&mut self.params);
        }
    }

    pub fn dsrn(&self) -> Option<&DsrnNet> {
        match &self.arch {
            Arch::Dual(net) => Some(net),
            Arch::Single(_) => None,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::from_params(&self.params);
        self.spec.to_manifest(&mut ck.manifest);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let spec = ModelSpec::from_manifest(&ck.manifest)?;
        let mut model = Model::new(spec, 0)?;
        ck.load_params(&mut model.params)?;
        Ok(model)
    }
}
