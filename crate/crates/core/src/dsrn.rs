//! The dual-state recurrent network.
//!
//! Two recurrent states are carried across `T` unrolling steps: `s_l` at the
//! LR resolution and `s_h` at the HR resolution. One step computes
//!
//! ```text
//! s_lᵗ = prelu_lᵗ( f_lr(s_lᵗ⁻¹) + f_down(s_hᵗ⁻¹) )
//! s_hᵗ = prelu_hᵗ( f_up(s_lᵗ)   + f_hr(s_hᵗ⁻¹)   )
//! ```
//!
//! `s_l` is updated first and feeds `f_up` within the same step, while
//! `f_down` reads the previous HR state (delayed feedback). `f_lr` and
//! `f_hr` are residual blocks, `f_down` is a stride-`s` convolution and
//! `f_up` a stride-`s` transposed convolution. The PReLU slopes are scalars
//! unique to each (state, step) pair; everything else is shared over steps.
//!
//! The residual prediction is the average of `f_output(s_hᵗ)` over all steps,
//! so every step is supervised directly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{prelu_state_activation, register_state_slope, ConvLayer, ResidualBlock};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Graph, Tensor, Var};

/// Tag describing the input embedding topology, recorded in checkpoints.
pub const EMBEDDING_TAG: &str = "conv1-win_relu_convwin-w+conv1-w";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsrnSpec {
    pub scale: usize,
    pub steps: usize,
    pub width_in: usize,
    pub width: usize,
    /// Whether the delayed HR→LR connection exists.
    pub feedback: bool,
    /// Whether transition weights are shared over steps.
    pub tied: bool,
}

impl DsrnSpec {
    pub fn new(scale: usize, steps: usize) -> Self {
        DsrnSpec {
            scale,
            steps,
            width_in: 64,
            width: 128,
            feedback: true,
            tied: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::Config("scale must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("unrolling length must be at least 1".into()));
        }
        if self.width == 0 || self.width_in == 0 {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        Ok(())
    }
}

/// The four state transitions.
#[derive(Debug, Clone)]
pub struct Transitions {
    pub f_lr: ResidualBlock,
    pub f_hr: ResidualBlock,
    pub f_up: ConvLayer,
    pub f_down: Option<ConvLayer>,
}

impl Transitions {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, spec: &DsrnSpec, rng: &mut R) -> Result<Self> {
        let w = spec.width;
        Ok(Transitions {
            f_lr: ResidualBlock::new(store, &format!("{prefix}.f_lr"), w, rng)?,
            f_hr: ResidualBlock::new(store, &format!("{prefix}.f_hr"), w, rng)?,
            f_up: ConvLayer::transposed(store, &format!("{prefix}.f_up"), w, w, spec.scale, rng)?,
            f_down: if spec.feedback {
                Some(ConvLayer::new(
                    store,
                    &format!("{prefix}.f_down"),
                    w,
                    w,
                    spec.scale,
                    rng,
                )?)
            } else {
                None
            },
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = self.f_lr.params();
        v.extend(self.f_hr.params());
        v.extend(self.f_up.params());
        if let Some(d) = &self.f_down {
            v.extend(d.params());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualState {
    pub s_l: Var,
    pub s_h: Var,
}

/// Everything recorded by one forward pass.
#[derive(Debug, Clone)]
pub struct DsrnTrace {
    pub input: Var,
    /// `(s_l, s_h)` for `t = 0 … T`.
    pub states: Vec<DualState>,
    /// `ŷ¹ … ŷᵀ`.
    pub outputs: Vec<Var>,
    /// Average of the per-step outputs.
    pub prediction: Var,
}

#[derive(Debug, Clone)]
pub struct DsrnNet {
    pub spec: DsrnSpec,
    pub embed_a: ConvLayer,
    pub embed_b: ConvLayer,
    pub embed_skip: ConvLayer,
    /// One entry when tied, `T` entries otherwise.
    pub cells: Vec<Transitions>,
    pub output: ConvLayer,
    pub slopes_l: Vec<ParamId>,
    pub slopes_h: Vec<ParamId>,
}

impl DsrnNet {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, spec: DsrnSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let embed_a = ConvLayer::new(store, "dsrn.embed.conv_a", 1, spec.width_in, 1, rng)?;
        let embed_b = ConvLayer::new(store, "dsrn.embed.conv_b", spec.width_in, spec.width, 1, rng)?;
        let embed_skip = ConvLayer::new(store, "dsrn.embed.skip", 1, spec.width, 1, rng)?;
        let cells = if spec.tied {
            vec![Transitions::new(store, "dsrn", &spec, rng)?]
        } else {
            (1..=spec.steps)
                .map(|t| Transitions::new(store, &format!("dsrn.step{t}"), &spec, rng))
                .collect::<Result<_>>()?
        };
        let output = ConvLayer::new(store, "dsrn.f_output", spec.width, 1, 1, rng)?;
        let mut slopes_l = Vec::with_capacity(spec.steps);
        let mut slopes_h = Vec::with_capacity(spec.steps);
        for t in 1..=spec.steps {
            slopes_l.push(register_state_slope(store, &format!("dsrn.prelu_l.{t}"))?);
            slopes_h.push(register_state_slope(store, &format!("dsrn.prelu_h.{t}"))?);
        }
        Ok(DsrnNet {
            spec,
            embed_a,
            embed_b,
            embed_skip,
            cells,
            output,
            slopes_l,
            slopes_h,
        })
    }

    /// Transition weights used at step `t` (1-based).
    pub fn cell(&self, t: usize) -> &Transitions {
        if self.spec.tied {
            &self.cells[0]
        } else {
            &self.cells[t - 1]
        }
    }

    /// `s_l⁰ = conv_b(relu(conv_a(I))) + skip(I)`, `s_h⁰ = 0` at HR size.
    pub fn init_states(&self, g: &mut Graph, store: &ParamStore, lr: Var) -> Result<DualState> {
        let (n, c, h, w) = g.value(lr).dims4()?;
        if c != 1 {
            return Err(Error::shape(
                "dsrn",
                format!("expected a 1-channel LR image, got {c} channels"),
            ));
        }
        let a = self.embed_a.forward(g, store, lr)?;
        let a = g.relu(a)?;
        let b = self.embed_b.forward(g, store, a)?;
        let skip = self.embed_skip.forward(g, store, lr)?;
        let s_l = g.add(b, skip)?;
        let s = self.spec.scale;
        let s_h = g.input(Tensor::zeros(&[n, self.spec.width, h * s, w * s]))?;
        Ok(DualState { s_l, s_h })
    }

    /// Advances the pair of states from step `t − 1` to `t`.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, prev: DualState, t: usize) -> Result<DualState> {
        if t == 0 || t > self.spec.steps {
            return Err(Error::Config(format!("step {t} outside 1..={}", self.spec.steps)));
        }
        let cell = self.cell(t);
        let lr_shape = g.shape(prev.s_l).to_vec();
        let hr_shape = g.shape(prev.s_h).to_vec();

        let self_l = cell.f_lr.forward(g, store, prev.s_l)?;
        let pre_l = match &cell.f_down {
            Some(down) => {
                let fb = down.forward(g, store, prev.s_h)?;
                g.add(self_l, fb)?
            }
            None => self_l,
        };
        let s_l = prelu_state_activation(g, store, pre_l, self.slopes_l[t - 1])?;

        let up = cell.f_up.forward(g, store, s_l)?;
        let self_h = cell.f_hr.forward(g, store, prev.s_h)?;
        let pre_h = g.add(up, self_h)?;
        let s_h = prelu_state_activation(g, store, pre_h, self.slopes_h[t - 1])?;

        if g.shape(s_l) != lr_shape.as_slice() || g.shape(s_h) != hr_shape.as_slice() {
            return Err(Error::shape(
                "dsrn step",
                format!(
                    "state shapes drifted at step {t}: {:?}, {:?}",
                    g.shape(s_l),
                    g.shape(s_h)
                ),
            ));
        }
        Ok(DualState { s_l, s_h })
    }

    /// Full unrolled forward pass on an `[N, 1, h, w]` LR batch.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, lr: &Tensor) -> Result<DsrnTrace> {
        let input = g.input(lr.clone())?;
        let mut state = self.init_states(g, store, input)?;
        let mut states = vec![state];
        let mut outputs = Vec::with_capacity(self.spec.steps);
        for t in 1..=self.spec.steps {
            g.set_step(Some(t));
            state = self.step(g, store, state, t)?;
            states.push(state);
            outputs.push(self.output.forward(g, store, state.s_h)?);
        }
        g.set_step(None);
        let sum = g.add_all(&outputs)?;
        let prediction = g.scale(sum, 1.0 / self.spec.steps as f64)?;
        Ok(DsrnTrace {
            input,
            states,
            outputs,
            prediction,
        })
    }

    /// Parameters of the state transitions (all cells).
    pub fn transition_params(&self) -> Vec<ParamId> {
        self.cells.iter().flat_map(Transitions::params).collect()
    }
}

/// `½·mean((Î_h − r)²)` with `r = I_h − bicubic_up(I_l)`.
pub fn dsrn_loss(g: &mut Graph, prediction: Var, hr: &Tensor, upsampled: &Tensor) -> Result<Var> {
    let residual = hr.zip_map(upsampled, |h, u| h - u).map_err(|_| {
        Error::shape(
            "dsrn_loss",
            format!("HR {:?} vs upsampled {:?}", hr.shape(), upsampled.shape()),
        )
    })?;
    let target = g.input(residual)?;
    g.mse_half(prediction, target)
}

/// Per-pixel channel L2 energy of each HR state, min–max normalized to `[0, 1]`.
///
/// Uses the first image of the batch. A map with no spread is all zeros.
pub fn energy_maps(g: &Graph, trace: &DsrnTrace) -> Result<Vec<Tensor>> {
    trace
        .states
        .iter()
        .skip(1)
        .map(|st| energy_map(g.value(st.s_h)))
        .collect()
}

pub fn energy_map(state: &Tensor) -> Result<Tensor> {
    let (_, c, h, w) = state.dims4()?;
    let plane = h * w;
    let d = state.data();
    let energy: Vec<f64> = (0..plane)
        .map(|p| (0..c).map(|ch| d[ch * plane + p].powi(2)).sum::<f64>().sqrt())
        .collect();
    let lo = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let normalized = if span > 0.0 {
        energy.iter().map(|e| (e - lo) / span).collect()
    } else {
        vec![0.0; plane]
    };
    Tensor::from_vec(&[1, 1, h, w], normalized)
}
