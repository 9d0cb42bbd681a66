//! Parameterized building blocks shared by every model variant.
//!
//! All kernels are 3×3. Plain convolutions use stride 1 and pad 1 so the
//! spatial size is preserved; the inter-resolution layers use stride = scale.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamRole, ParamStore};
use crate::tensor::{Graph, Tensor, Var};

pub const KERNEL: usize = 3;

/// Initial negative-side slope of every state PReLU.
pub const PRELU_INIT: f64 = 0.25;

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// I.i.d. samples from `U[-b, b]` with the Glorot bound.
pub fn glorot_uniform_init<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let b = glorot_bound(fan_in, fan_out);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-b..=b)).collect();
    Tensor::from_vec(shape, data).expect("shape and data length agree")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConvKind {
    Forward,
    Transposed { output_padding: usize },
}

/// A 3×3 convolution (or transposed convolution) with bias.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub pad: usize,
    kind: ConvKind,
}

impl ConvLayer {
    /// Registers `{name}.weight` `[cout, cin, 3, 3]` and `{name}.bias`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let area = KERNEL * KERNEL;
        let w = glorot_uniform_init(
            &[out_channels, in_channels, KERNEL, KERNEL],
            in_channels * area,
            out_channels * area,
            rng,
        );
        Ok(ConvLayer {
            kernel: store.register(format!("{name}.weight"), w, ParamRole::Shared)?,
            bias: store.register(
                format!("{name}.bias"),
                Tensor::zeros(&[out_channels]),
                ParamRole::Shared,
            )?,
            in_channels,
            out_channels,
            stride,
            pad: 1,
            kind: ConvKind::Forward,
        })
    }

    /// A learned upsampler: output is exactly `stride` times the input size.
    ///
    /// Pad 1 with output padding `stride − 1`; the weight is laid out
    /// `[cin, cout, 3, 3]`.
    pub fn transposed<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config(format!("{name}: stride must be at least 1")));
        }
        let area = KERNEL * KERNEL;
        let w = glorot_uniform_init(
            &[in_channels, out_channels, KERNEL, KERNEL],
            in_channels * area,
            out_channels * area,
            rng,
        );
        Ok(ConvLayer {
            kernel: store.register(format!("{name}.weight"), w, ParamRole::Shared)?,
            bias: store.register(
                format!("{name}.bias"),
                Tensor::zeros(&[out_channels]),
                ParamRole::Shared,
            )?,
            in_channels,
            out_channels,
            stride,
            pad: 1,
            kind: ConvKind::Transposed {
                output_padding: stride - 1,
            },
        })
    }

    pub fn is_transposed(&self) -> bool {
        matches!(self.kind, ConvKind::Transposed { .. })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let c = g.shape(x).get(1).copied().unwrap_or(0);
        if c != self.in_channels {
            return Err(Error::shape(
                "conv layer",
                format!("channel dimension is {c}, layer expects {}", self.in_channels),
            ));
        }
        let k = g.param(store, self.kernel)?;
        let b = g.param(store, self.bias)?;
        match self.kind {
            ConvKind::Forward => g.conv2d(x, k, Some(b), self.stride, self.pad),
            ConvKind::Transposed { output_padding } => {
                g.conv_transpose2d(x, k, Some(b), self.stride, self.pad, output_padding)
            }
        }
    }

    /// Parameter ids in registration order.
    pub fn params(&self) -> [ParamId; 2] {
        [self.kernel, self.bias]
    }
}

/// Pre-activation residual block: `x + conv2(relu(conv1(relu(x))))`.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
}

impl ResidualBlock {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, channels: usize, rng: &mut R) -> Result<Self> {
        Ok(ResidualBlock {
            conv1: ConvLayer::new(store, &format!("{name}.conv1"), channels, channels, 1, rng)?,
            conv2: ConvLayer::new(store, &format!("{name}.conv2"), channels, channels, 1, rng)?,
        })
    }

    /// The residual branch without the skip.
    pub fn body(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let h = g.relu(x)?;
        let h = self.conv1.forward(g, store, h)?;
        let h = g.relu(h)?;
        self.conv2.forward(g, store, h)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let r = self.body(g, store, x)?;
        g.add(x, r)
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = self.conv1.params().to_vec();
        v.extend(self.conv2.params());
        v
    }
}

/// Registers a scalar PReLU slope initialized to [`PRELU_INIT`].
pub fn register_state_slope(store: &mut ParamStore, name: &str) -> Result<ParamId> {
    store.register(name, Tensor::scalar(PRELU_INIT), ParamRole::PerStep)
}

/// Elementwise PReLU with a single learnable scalar slope.
pub fn prelu_state_activation(g: &mut Graph, store: &ParamStore, x: Var, slope: ParamId) -> Result<Var> {
    let s = g.param(store, slope)?;
    g.prelu(x, s)
}
