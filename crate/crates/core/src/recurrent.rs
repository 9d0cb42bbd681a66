//! Single-state recurrent view of ResNet, DRCN and DRRN.
//!
//! All three share `s⁰ = embed(I)` on the bicubic-upscaled image, zero
//! external input at every step, and one set of recurrent weights reused at
//! every step. They differ only in the transition and the output rule:
//!
//! | variant | transition                 | output                     |
//! |---------|----------------------------|----------------------------|
//! | ResNet  | `sᵗ = sᵗ⁻¹ + g(sᵗ⁻¹)`      | `f_out(sᵀ)`                |
//! | DRCN    | `sᵗ = conv(sᵗ⁻¹)`          | `Σₜ wₜ · f_out(sᵗ)`        |
//! | DRRN    | `sᵗ = s⁰ + g(sᵗ⁻¹)`        | `f_out(sᵀ)`                |
//!
//! where `g` is the two-convolution residual body. Every variant predicts
//! the residual over the bicubic upsample.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{ConvLayer, ResidualBlock};
use crate::params::{ParamId, ParamRole, ParamStore};
use crate::tensor::{Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Resnet,
    Drcn,
    Drrn,
}

#[derive(Debug, Clone)]
enum Transition {
    Block(ResidualBlock),
    Conv(ConvLayer),
}

/// Forward states and outputs of one unrolled run.
#[derive(Debug, Clone)]
pub struct UnrolledTrace {
    pub input: Var,
    /// `s⁰ … sᵀ`.
    pub states: Vec<Var>,
    /// Per-step outputs `y¹ … yᵀ`; only the last is populated unless the
    /// variant supervises every step.
    pub outputs: Vec<Var>,
    pub prediction: Var,
}

#[derive(Debug, Clone)]
pub struct SingleStateNet {
    pub variant: Variant,
    pub steps: usize,
    pub channels: usize,
    pub embed: ConvLayer,
    transition: Transition,
    pub output: ConvLayer,
    /// DRCN combination weights, one per step.
    pub combine: Vec<ParamId>,
}

impl SingleStateNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        variant: Variant,
        steps: usize,
        channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("unrolling length must be at least 1".into()));
        }
        let prefix = match variant {
            Variant::Resnet => "resnet",
            Variant::Drcn => "drcn",
            Variant::Drrn => "drrn",
        };
        let embed = ConvLayer::new(store, &format!("{prefix}.embed"), 1, channels, 1, rng)?;
        let transition = match variant {
            Variant::Drcn => Transition::Conv(ConvLayer::new(
                store,
                &format!("{prefix}.recurrent"),
                channels,
                channels,
                1,
                rng,
            )?),
            _ => Transition::Block(ResidualBlock::new(
                store,
                &format!("{prefix}.recurrent"),
                channels,
                rng,
            )?),
        };
        let output = ConvLayer::new(store, &format!("{prefix}.output"), channels, 1, 1, rng)?;
        let combine = match variant {
            Variant::Drcn => (1..=steps)
                .map(|t| {
                    store.register(
                        format!("{prefix}.combine.{t}"),
                        Tensor::scalar(1.0 / steps as f64),
                        ParamRole::PerStep,
                    )
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        Ok(SingleStateNet {
            variant,
            steps,
            channels,
            embed,
            transition,
            output,
            combine,
        })
    }

    /// Parameters of the recurrent transition only.
    pub fn transition_params(&self) -> Vec<ParamId> {
        match &self.transition {
            Transition::Block(b) => b.params(),
            Transition::Conv(c) => c.params().to_vec(),
        }
    }

    pub fn init_state(&self, g: &mut Graph, store: &ParamStore, image: Var) -> Result<Var> {
        self.embed.forward(g, store, image)
    }

    fn block(&self) -> Result<&ResidualBlock> {
        match &self.transition {
            Transition::Block(b) => Ok(b),
            Transition::Conv(_) => Err(Error::Config("variant has no residual block".into())),
        }
    }

    pub fn step_resnet(&self, g: &mut Graph, store: &ParamStore, prev: Var) -> Result<Var> {
        self.block()?.forward(g, store, prev)
    }

    pub fn step_drcn(&self, g: &mut Graph, store: &ParamStore, prev: Var) -> Result<Var> {
        match &self.transition {
            Transition::Conv(c) => c.forward(g, store, prev),
            Transition::Block(_) => Err(Error::Config("variant has no single recurrent conv".into())),
        }
    }

    pub fn step_drrn(&self, g: &mut Graph, store: &ParamStore, prev: Var, first: Var) -> Result<Var> {
        let r = self.block()?.body(g, store, prev)?;
        g.add(first, r)
    }

    /// `Σₜ wₜ · yᵗ` over the supplied per-step outputs.
    pub fn drcn_output(&self, g: &mut Graph, store: &ParamStore, outputs: &[Var]) -> Result<Var> {
        let terms = outputs
            .iter()
            .zip(&self.combine)
            .map(|(&y, &w)| {
                let wv = g.param(store, w)?;
                g.scale_by(y, wv)
            })
            .collect::<Result<Vec<_>>>()?;
        g.add_all(&terms)
    }

    /// Runs `T` steps from the bicubic-upscaled image `upsampled`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, upsampled: &Tensor) -> Result<UnrolledTrace> {
        let input = g.input(upsampled.clone())?;
        let s0 = self.init_state(g, store, input)?;
        let mut states = vec![s0];
        let mut outputs = Vec::new();
        for t in 1..=self.steps {
            g.set_step(Some(t));
            let prev = states[t - 1];
            let next = match self.variant {
                Variant::Resnet => self.step_resnet(g, store, prev)?,
                Variant::Drcn => self.step_drcn(g, store, prev)?,
                Variant::Drrn => self.step_drrn(g, store, prev, s0)?,
            };
            states.push(next);
            if self.variant == Variant::Drcn || t == self.steps {
                outputs.push(self.output.forward(g, store, next)?);
            }
        }
        g.set_step(None);
        let prediction = match self.variant {
            Variant::Drcn => self.drcn_output(g, store, &outputs)?,
            _ => *outputs.last().expect("steps >= 1"),
        };
        Ok(UnrolledTrace {
            input,
            states,
            outputs,
            prediction,
        })
    }

    /// Renormalizes DRCN weights to sum to one. No-op for other variants.
    pub fn normalize_combination(&self, store: &mut ParamStore) {
        if self.combine.is_empty() {
            return;
        }
        let total: f64 = self.combine.iter().map(|&w| store.value(w).data()[0]).sum();
        if total.abs() < 1e-12 || !total.is_finite() {
            return;
        }
        for &w in &self.combine {
            store.value_mut(w).data_mut()[0] /= total;
        }
    }
}
