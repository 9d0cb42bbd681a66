//! Gradient clipping, SGD with momentum, and plateau learning-rate decay.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMode {
    /// Clamp every element to `[-c, c]`.
    Value,
    /// Rescale all gradients together so their global L2 norm is at most `c`.
    Norm,
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClipMode::Value => "value",
            ClipMode::Norm => "norm",
        })
    }
}

impl FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value" => Ok(ClipMode::Value),
            "norm" => Ok(ClipMode::Norm),
            _ => Err(Error::Config(format!(
                "invalid value `{s}` for `clip_mode` (expected value or norm)"
            ))),
        }
    }
}

pub fn clip_gradients(store: &mut ParamStore, mode: ClipMode, bound: f64) {
    let ids: Vec<_> = store.ids().collect();
    match mode {
        ClipMode::Value => {
            for id in ids {
                for g in store.grad_mut(id).data_mut() {
                    *g = g.clamp(-bound, bound);
                }
            }
        }
        ClipMode::Norm => {
            let norm = ids
                .iter()
                .map(|&id| store.grad(id).data().iter().map(|g| g * g).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > bound {
                let k = bound / norm;
                for id in ids {
                    for g in store.grad_mut(id).data_mut() {
                        *g *= k;
                    }
                }
            }
        }
    }
}

/// Classical momentum: `v ← μ·v − lr·g`, `θ ← θ + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub momentum: f64,
    /// One velocity per parameter, in store order.
    pub velocity: Vec<Tensor>,
}

impl SgdMomentum {
    pub fn new(store: &ParamStore, momentum: f64) -> Self {
        SgdMomentum {
            momentum,
            velocity: store.ids().map(|id| Tensor::zeros(store.value(id).shape())).collect(),
        }
    }

    /// Applies one update and zeroes the gradients. Nothing is written if any
    /// updated value would be non-finite.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64, iteration: usize) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        if ids.len() != self.velocity.len() {
            return Err(Error::Config("optimizer state does not match the parameter set".into()));
        }
        let mut next_v = Vec::with_capacity(ids.len());
        for (&id, v) in ids.iter().zip(&self.velocity) {
            let nv = v.zip_map(store.grad(id), |v, g| self.momentum * v - lr * g)?;
            let moved_ok = nv
                .data()
                .iter()
                .zip(store.value(id).data())
                .all(|(d, p)| (p + d).is_finite());
            if !moved_ok {
                return Err(Error::NonFinite {
                    op: format!("sgd update of `{}`", store.name(id)),
                    step: Some(iteration),
                });
            }
            next_v.push(nv);
        }
        for (&id, nv) in ids.iter().zip(&next_v) {
            store.value_mut(id).add_assign(nv)?;
        }
        self.velocity = next_v;
        store.zero_grads();
        Ok(())
    }
}

/// Divides the learning rate when validation loss stops improving.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub lr: f64,
    pub factor: f64,
    pub max_decays: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub decays: usize,
    pub best: f64,
    /// Consecutive evaluations without improvement.
    pub stale: usize,
}

impl Plateau {
    pub fn new(lr0: f64, factor: f64, max_decays: usize, patience: usize, min_delta: f64) -> Self {
        Plateau {
            lr: lr0,
            factor,
            max_decays,
            patience,
            min_delta,
            decays: 0,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records a validation loss. Returns true when the rate was just lowered.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience && self.decays < self.max_decays {
            self.lr /= self.factor;
            self.decays += 1;
            self.stale = 0;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamRole;

    fn store_with(value: f64, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.register("w", Tensor::scalar(value), ParamRole::Shared).unwrap();
        s.grad_mut(id).data_mut()[0] = grad;
        s
    }

    #[test]
    fn first_step_and_pure_momentum() {
        let mut s = store_with(1.0, 1.0);
        let mut opt = SgdMomentum::new(&s, 0.95);
        opt.step(&mut s, 0.1, 0).unwrap();
        let id = s.id("w").unwrap();
        assert!((s.value(id).data()[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.grad(id).data()[0], 0.0);
        let before = s.value(id).data()[0];
        opt.step(&mut s, 0.1, 1).unwrap();
        assert!((s.value(id).data()[0] - (before - 0.95 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_update_leaves_params() {
        let mut s = store_with(1.0, f64::INFINITY);
        let mut opt = SgdMomentum::new(&s, 0.95);
        let e = opt.step(&mut s, 0.1, 42).unwrap_err();
        assert!(e.is_numeric());
        assert!(e.to_string().contains("step 42"), "{e}");
        assert_eq!(s.value(s.id("w").unwrap()).data()[0], 1.0);
    }

    #[test]
    fn norm_clipping() {
        let mut s = ParamStore::new();
        let a = s.register("a", Tensor::zeros(&[2]), ParamRole::Shared).unwrap();
        s.grad_mut(a).data_mut().copy_from_slice(&[3.0, 4.0]);
        clip_gradients(&mut s, ClipMode::Norm, 0.5);
        assert!((s.grad(a).data()[0] - 0.3).abs() < 1e-15);
        assert!((s.grad(a).data()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn plateau_three_decays() {
        let mut p = Plateau::new(0.01, 10.0, 3, 1, 1e-5);
        p.observe(1.0);
        for _ in 0..10 {
            p.observe(1.0);
        }
        assert_eq!(p.decays, 3);
        assert!((p.lr - 1e-5).abs() < 1e-18);
    }
}
