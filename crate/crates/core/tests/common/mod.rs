#![allow(dead_code)]

use std::collections::HashMap;

use dsrn::dsrn::DsrnSpec;
use dsrn::params::{ParamId, ParamStore};
use dsrn::recurrent::Variant;
use dsrn::tensor::{Graph, Tensor, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], r: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Direct six-loop cross-correlation with zero padding.
pub fn conv2d_loops(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
    let (n, cin, h, w) = x.dims4().unwrap();
    let (cout, _, kh, kw) = k.dims4().unwrap();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * cout * oh * ow];
    let xd = x.data();
    let kd = k.data();
    for ni in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[co];
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = xd[((ni * cin + ci) * h + iy as usize) * w + ix as usize];
                                let kv = kd[((co * cin + ci) * kh + ky) * kw + kx];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[((ni * cout + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[n, cout, oh, ow], out).unwrap()
}

/// Norm-relative error `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or the absolute error
/// when both are tiny.
pub fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central finite-difference gradient of a scalar graph builder.
pub fn numeric_grad(inputs: &[Tensor], which: usize, h: f64, build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> Tensor {
    let eval = |vals: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
        let out = build(&mut g, &vars);
        g.value(out).item().unwrap()
    };
    let mut grad = Tensor::zeros(inputs[which].shape());
    for i in 0..inputs[which].len() {
        let mut plus = inputs.to_vec();
        plus[which].data_mut()[i] += h;
        let mut minus = inputs.to_vec();
        minus[which].data_mut()[i] -= h;
        grad.data_mut()[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
    }
    grad
}

/// Worst relative error between analytic and numeric gradients over all inputs.
pub fn grad_check(inputs: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out).unwrap();
    (0..inputs.len())
        .map(|i| rel_err(&grads.wrt(vars[i]), &numeric_grad(inputs, i, 1e-6, build)))
        .fold(0.0, f64::max)
}

/// Direct scatter form of the transposed convolution, kernel `[Cin, Cout, kh, kw]`.
pub fn conv_transpose_loops(
    x: &Tensor,
    k: &Tensor,
    b: &Tensor,
    stride: usize,
    pad: usize,
    output_padding: usize,
) -> Tensor {
    let (n, cin, h, w) = x.dims4().unwrap();
    let (_, cout, kh, kw) = k.dims4().unwrap();
    let oh = (h - 1) * stride + kh + output_padding - 2 * pad;
    let ow = (w - 1) * stride + kw + output_padding - 2 * pad;
    let mut out = vec![0.0; n * cout * oh * ow];
    for ni in 0..n {
        for co in 0..cout {
            for p in 0..oh * ow {
                out[(ni * cout + co) * oh * ow + p] = b.data()[co];
            }
        }
        for ci in 0..cin {
            for iy in 0..h {
                for ix in 0..w {
                    let xv = x.data()[((ni * cin + ci) * h + iy) * w + ix];
                    for co in 0..cout {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let oy = (iy * stride + ky) as isize - pad as isize;
                                let ox = (ix * stride + kx) as isize - pad as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                let kv = k.data()[((ci * cout + co) * kh + ky) * kw + kx];
                                out[((ni * cout + co) * oh + oy as usize) * ow + ox as usize] += xv * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[n, cout, oh, ow], out).unwrap()
}

/// Builds a graph in which every use of a stored parameter is its own leaf,
/// so weight sharing is spelled out copy by copy.
pub struct Unrolled<'a> {
    pub g: Graph,
    store: &'a ParamStore,
    pub copies: Vec<(ParamId, Var)>,
}

impl<'a> Unrolled<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Unrolled {
            g: Graph::new(),
            store,
            copies: Vec::new(),
        }
    }

    pub fn copy(&mut self, name: &str) -> Var {
        let id = self.store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
        let v = self.g.leaf(self.store.value(id).clone()).unwrap();
        self.copies.push((id, v));
        v
    }

    pub fn conv(&mut self, x: Var, name: &str, stride: usize) -> Var {
        let k = self.copy(&format!("{name}.weight"));
        let b = self.copy(&format!("{name}.bias"));
        self.g.conv2d(x, k, Some(b), stride, 1).unwrap()
    }

    pub fn conv_t(&mut self, x: Var, name: &str, stride: usize) -> Var {
        let k = self.copy(&format!("{name}.weight"));
        let b = self.copy(&format!("{name}.bias"));
        self.g.conv_transpose2d(x, k, Some(b), stride, 1, stride - 1).unwrap()
    }

    pub fn body(&mut self, x: Var, name: &str) -> Var {
        let h = self.g.relu(x).unwrap();
        let h = self.conv(h, &format!("{name}.conv1"), 1);
        let h = self.g.relu(h).unwrap();
        self.conv(h, &format!("{name}.conv2"), 1)
    }

    pub fn block(&mut self, x: Var, name: &str) -> Var {
        let r = self.body(x, name);
        self.g.add(x, r).unwrap()
    }

    pub fn prelu(&mut self, x: Var, name: &str) -> Var {
        let s = self.copy(name);
        self.g.prelu(x, s).unwrap()
    }

    /// Gradient of every stored parameter, summed over its copies.
    pub fn summed_grads(&self, loss: Var) -> HashMap<ParamId, Tensor> {
        let grads = self.g.backward(loss).unwrap();
        let mut out: HashMap<ParamId, Tensor> = HashMap::new();
        for &(id, v) in &self.copies {
            let gv = grads.wrt(v);
            out.entry(id)
                .and_modify(|acc| acc.add_assign(&gv).unwrap())
                .or_insert(gv);
        }
        out
    }
}

/// Loop-graph parameter gradients against an explicit graph's summed copies.
pub fn worst_shared_grad_err(g: &Graph, loss: Var, explicit: &HashMap<ParamId, Tensor>) -> f64 {
    let grads = g.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    for (id, v) in g.param_vars() {
        let e = explicit.get(&id).expect("parameter used by both graphs");
        worst = worst.max(rel_err(&grads.wrt(v), e));
        seen += 1;
    }
    assert_eq!(seen, explicit.len(), "both graphs use the same parameters");
    worst
}

/// Max relative error of analytic parameter gradients against central
/// differences, one tensor at a time.
pub fn param_grad_check(store: &ParamStore, build: &dyn Fn(&mut Graph, &ParamStore) -> Var) -> f64 {
    let mut g = Graph::new();
    let loss = build(&mut g, store);
    let grads = g.backward(loss).unwrap();
    let analytic: HashMap<ParamId, Tensor> = g.param_vars().map(|(id, v)| (id, grads.wrt(v))).collect();
    let h = 1e-6;
    let mut work = store.clone();
    let eval = |s: &ParamStore| {
        let mut g = Graph::new();
        let l = build(&mut g, s);
        g.value(l).item().unwrap()
    };
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        let mut numeric = Tensor::zeros(store.value(id).shape());
        for i in 0..numeric.len() {
            let orig = work.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = orig + h;
            let plus = eval(&work);
            work.value_mut(id).data_mut()[i] = orig - h;
            let minus = eval(&work);
            work.value_mut(id).data_mut()[i] = orig;
            numeric.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
        let a = analytic
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.value(id).shape()));
        worst = worst.max(rel_err(&a, &numeric));
    }
    worst
}

/// The same network written out with a fresh weight copy at every step.
pub fn explicit_single(u: &mut Unrolled<'_>, variant: Variant, steps: usize, input: &Tensor) -> Var {
    let prefix = match variant {
        Variant::Resnet => "resnet",
        Variant::Drcn => "drcn",
        Variant::Drrn => "drrn",
    };
    let x = u.g.input(input.clone()).unwrap();
    let s0 = u.conv(x, &format!("{prefix}.embed"), 1);
    let rec = format!("{prefix}.recurrent");
    let out = format!("{prefix}.output");
    let mut s = s0;
    let mut terms = Vec::new();
    for t in 1..=steps {
        s = match variant {
            Variant::Resnet => u.block(s, &rec),
            Variant::Drcn => u.conv(s, &rec, 1),
            Variant::Drrn => {
                let r = u.body(s, &rec);
                u.g.add(s0, r).unwrap()
            }
        };
        if variant == Variant::Drcn {
            let y = u.conv(s, &out, 1);
            let w = u.copy(&format!("{prefix}.combine.{t}"));
            terms.push(u.g.scale_by(y, w).unwrap());
        }
    }
    match variant {
        Variant::Drcn => u.g.add_all(&terms).unwrap(),
        _ => u.conv(s, &out, 1),
    }
}

/// DSRN written out with a fresh weight copy at every step.
pub fn explicit_dsrn(u: &mut Unrolled<'_>, spec: DsrnSpec, input: &Tensor) -> Var {
    let s = spec.scale;
    let x = u.g.input(input.clone()).unwrap();
    let a = u.conv(x, "dsrn.embed.conv_a", 1);
    let a = u.g.relu(a).unwrap();
    let b = u.conv(a, "dsrn.embed.conv_b", 1);
    let skip = u.conv(x, "dsrn.embed.skip", 1);
    let mut sl = u.g.add(b, skip).unwrap();
    let (n, _, h, w) = input.dims4().unwrap();
    let mut sh = u.g.input(Tensor::zeros(&[n, spec.width, h * s, w * s])).unwrap();
    let mut outs = Vec::new();
    for t in 1..=spec.steps {
        let self_l = u.block(sl, "dsrn.f_lr");
        let fb = u.conv(sh, "dsrn.f_down", s);
        let pre_l = u.g.add(self_l, fb).unwrap();
        let new_l = u.prelu(pre_l, &format!("dsrn.prelu_l.{t}"));
        let up = u.conv_t(new_l, "dsrn.f_up", s);
        let self_h = u.block(sh, "dsrn.f_hr");
        let pre_h = u.g.add(up, self_h).unwrap();
        sh = u.prelu(pre_h, &format!("dsrn.prelu_h.{t}"));
        sl = new_l;
        outs.push(u.conv(sh, "dsrn.f_output", 1));
    }
    let sum = u.g.add_all(&outs).unwrap();
    u.g.scale(sum, 1.0 / spec.steps as f64).unwrap()
}
