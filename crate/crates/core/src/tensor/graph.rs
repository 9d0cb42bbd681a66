//! Tape of differentiable operations.
//!
//! A [`Graph`] records every forward op in creation order, which is already a
//! topological order. [`Graph::backward`] walks the tape once in reverse.
//! Parameters enter the tape through [`Graph::param`]; a parameter used at
//! several unrolling steps is a single leaf with several consumers, so its
//! gradient is the sum over all uses.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

use super::conv;
use super::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Leaf,
    Param(ParamId),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
        output_padding: usize,
    },
    Add(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Relu(Var),
    Prelu(Var, Var),
    MseHalf(Var, Var),
    Sum(Var),
}

/// Coarse classification of a recorded node, for structural queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Input,
    Leaf,
    Param,
    Conv2d,
    ConvTranspose2d,
    Add,
    Scale,
    ScaleBy,
    Relu,
    Prelu,
    MseHalf,
    Sum,
}

impl OpKind {
    pub fn is_convolution(self) -> bool {
        matches!(self, OpKind::Conv2d | OpKind::ConvTranspose2d)
    }
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Input => OpKind::Input,
            Op::Leaf => OpKind::Leaf,
            Op::Param(_) => OpKind::Param,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::ConvTranspose2d { .. } => OpKind::ConvTranspose2d,
            Op::Add(..) => OpKind::Add,
            Op::Scale(..) => OpKind::Scale,
            Op::ScaleBy(..) => OpKind::ScaleBy,
            Op::Relu(_) => OpKind::Relu,
            Op::Prelu(..) => OpKind::Prelu,
            Op::MseHalf(..) => OpKind::MseHalf,
            Op::Sum(_) => OpKind::Sum,
        }
    }

    fn name(&self) -> &'static str {
        match self.kind() {
            OpKind::Input => "input",
            OpKind::Leaf => "leaf",
            OpKind::Param => "param",
            OpKind::Conv2d => "conv2d",
            OpKind::ConvTranspose2d => "conv_transpose2d",
            OpKind::Add => "add",
            OpKind::Scale => "scale",
            OpKind::ScaleBy => "scale_by",
            OpKind::Relu => "relu",
            OpKind::Prelu => "prelu",
            OpKind::MseHalf => "mse_half",
            OpKind::Sum => "sum",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Input | Op::Leaf | Op::Param(_) => vec![],
            Op::Conv2d {
                input, kernel, bias, ..
            }
            | Op::ConvTranspose2d {
                input, kernel, bias, ..
            } => {
                let mut v = vec![input, kernel];
                v.extend(bias);
                v
            }
            Op::Add(a, b) | Op::ScaleBy(a, b) | Op::Prelu(a, b) | Op::MseHalf(a, b) => vec![a, b],
            Op::Scale(a, _) | Op::Relu(a) | Op::Sum(a) => vec![a],
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// A single-use forward tape. Build it, call [`Graph::backward`], drop it.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    step: Option<usize>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tags subsequent non-finite errors with an unrolling or training step.
    pub fn set_step(&mut self, step: Option<usize>) {
        self.step = step;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// The stored parameter behind a node, if it is one.
    pub fn param_id(&self, v: Var) -> Option<ParamId> {
        match self.nodes[v.0].op {
            Op::Param(id) => Some(id),
            _ => None,
        }
    }

    /// Direct operands of a node.
    pub fn inputs_of(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.inputs()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: op.name().to_string(),
                step: self.step,
            });
        }
        let requires_grad = match op {
            Op::Input => false,
            Op::Leaf | Op::Param(_) => true,
            _ => op.inputs().iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant: never receives a gradient.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Input, value)
    }

    /// A free variable whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Leaf, value)
    }

    /// The tape node for a stored parameter. Repeated calls return the same
    /// node, so every use shares one accumulated gradient.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.params.get(&id) {
            return Ok(v);
        }
        let v = self.push(Op::Param(id), store.value(id).clone())?;
        self.params.insert(id, v);
        Ok(v)
    }

    pub fn param_vars(&self) -> impl Iterator<Item = (ParamId, Var)> + '_ {
        self.params.iter().map(|(&p, &v)| (p, v))
    }

    /// Zero-padded strided cross-correlation.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let out = conv::conv2d_forward(
            self.value(input),
            self.value(kernel),
            bias.map(|b| self.value(b)),
            stride,
            pad,
        )?;
        self.push(
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                pad,
            },
            out,
        )
    }

    /// Adjoint of [`Graph::conv2d`]; the kernel is laid out `[Cin, Cout, kh, kw]`.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
        output_padding: usize,
    ) -> Result<Var> {
        let out = conv::conv_transpose2d_forward(
            self.value(input),
            self.value(kernel),
            bias.map(|b| self.value(b)),
            stride,
            pad,
            output_padding,
        )?;
        self.push(
            Op::ConvTranspose2d {
                input,
                kernel,
                bias,
                stride,
                pad,
                output_padding,
            },
            out,
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self
            .value(a)
            .zip_map(self.value(b), |x, y| x + y)
            .map_err(|_| Error::shape("add", format!("{:?} vs {:?}", self.shape(a), self.shape(b))))?;
        self.push(Op::Add(a, b), out)
    }

    /// Sum of one or more same-shaped values, folded left to right.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms.split_first().ok_or_else(|| Error::shape("add", "no operands"))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Multiplies by a fixed constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| c * x);
        self.push(Op::Scale(a, c), out)
    }

    /// Multiplies by a one-element tensor that may itself be trainable.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let c = self
            .value(s)
            .item()
            .ok_or_else(|| Error::shape("scale_by", format!("factor shape {:?}", self.shape(s))))?;
        let out = self.value(a).map(|x| c * x);
        self.push(Op::ScaleBy(a, s), out)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), out)
    }

    /// `x` for `x ≥ 0`, `slope·x` otherwise; `slope` is a one-element tensor.
    pub fn prelu(&mut self, a: Var, slope: Var) -> Result<Var> {
        let s = self
            .value(slope)
            .item()
            .ok_or_else(|| Error::shape("prelu", format!("slope shape {:?}", self.shape(slope))))?;
        let out = self.value(a).map(|x| if x >= 0.0 { x } else { s * x });
        self.push(Op::Prelu(a, slope), out)
    }

    /// `½·mean((a − b)²)` as a one-element tensor.
    pub fn mse_half(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "mse_half",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let sq: f64 = va.data().iter().zip(vb.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        let out = Tensor::scalar(0.5 * sq / va.len() as f64);
        self.push(Op::MseHalf(a, b), out)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), out)
    }

    /// Longest chain of convolution nodes on any path from `from` to `to`.
    ///
    /// Returns `None` when `to` does not depend on `from`.
    pub fn conv_depth(&self, from: Var, to: Var) -> Option<usize> {
        let mut depth: Vec<Option<usize>> = vec![None; to.0 + 1];
        if from.0 <= to.0 {
            depth[from.0] = Some(0);
        }
        for i in from.0 + 1..=to.0 {
            let node = &self.nodes[i];
            let best = node.op.inputs().iter().filter_map(|v| depth[v.0]).max();
            let own = usize::from(node.op.kind().is_convolution());
            depth[i] = best.map(|d| d + own);
        }
        depth[to.0]
    }

    /// Reverse-mode sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be a scalar, got shape {:?}", lv.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    op: format!("{} (backward)", node.op.name()),
                    step: self.step,
                });
            }
            let contributions = self.local_grads(&node.op, &g)?;
            for (v, d) in contributions {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&d)?,
                    slot @ None => *slot = Some(d),
                }
            }
            grads[i] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    /// Backward pass whose parameter gradients are added into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        grads.accumulate_into(self, store)?;
        Ok(grads)
    }

    fn local_grads(&self, op: &Op, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let need = |v: Var| self.nodes[v.0].requires_grad;
        Ok(match *op {
            Op::Input | Op::Leaf | Op::Param(_) => vec![],
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                pad,
            } => {
                let (dx, dw, db) =
                    conv::conv2d_backward(self.value(input), self.value(kernel), g, stride, pad, need(input))?;
                let mut out = vec![(kernel, dw)];
                out.extend(dx.map(|d| (input, d)));
                out.extend(bias.map(|b| (b, db)));
                out
            }
            Op::ConvTranspose2d {
                input,
                kernel,
                bias,
                stride,
                pad,
                output_padding,
            } => {
                let (dx, dw, db) = conv::conv_transpose2d_backward(
                    self.value(input),
                    self.value(kernel),
                    g,
                    stride,
                    pad,
                    output_padding,
                    need(input),
                )?;
                let mut out = vec![(kernel, dw)];
                out.extend(dx.map(|d| (input, d)));
                out.extend(bias.map(|b| (b, db)));
                out
            }
            Op::Add(a, b) => vec![(a, g.clone()), (b, g.clone())],
            Op::Scale(a, c) => vec![(a, g.map(|x| c * x))],
            Op::ScaleBy(a, s) => {
                let c = self.value(s).data()[0];
                let ds = g.dot(self.value(a))?;
                vec![(a, g.map(|x| c * x)), (s, Tensor::scalar(ds))]
            }
            Op::Relu(a) => vec![(a, g.zip_map(self.value(a), |gy, x| if x > 0.0 { gy } else { 0.0 })?)],
            Op::Prelu(a, slope) => {
                let s = self.value(slope).data()[0];
                let x = self.value(a);
                let dx = g.zip_map(x, |gy, xv| if xv >= 0.0 { gy } else { s * gy })?;
                let ds: f64 = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .filter(|(_, &xv)| xv < 0.0)
                    .map(|(gy, xv)| gy * xv)
                    .sum();
                vec![(a, dx), (slope, Tensor::scalar(ds))]
            }
            Op::MseHalf(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                let k = g.data()[0] / va.len() as f64;
                let da = va.zip_map(vb, |x, y| k * (x - y))?;
                let db = da.map(|v| -v);
                vec![(a, da), (b, db)]
            }
            Op::Sum(a) => {
                let gv = g.data()[0];
                vec![(a, Tensor::full(self.shape(a), gv))]
            }
        })
    }
}

/// Result of [`Graph::backward`]: one optional gradient per tape node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros if `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds every parameter gradient into the store's gradient buffers.
    pub fn accumulate_into(&self, graph: &Graph, store: &mut ParamStore) -> Result<()> {
        for (id, v) in graph.param_vars() {
            if let Some(g) = self.get(v) {
                store.grad_mut(id).add_assign(g)?;
            }
        }
        Ok(())
    }
}
