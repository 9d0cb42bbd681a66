//! Named, ordered storage for trainable tensors and their gradients.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a parameter within its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether a parameter is shared across unrolling steps or belongs to one.
///
/// Per-step parameters (state PReLU slopes, output combination weights)
/// grow with the unrolling length; everything else must not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Shared,
    PerStep,
}

#[derive(Debug, Clone)]
struct Entry {
    value: Tensor,
    grad: Tensor,
    role: ParamRole,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: IndexMap<String, Entry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new parameter. Names must be unique.
    pub fn register(&mut self, name: impl Into<String>, value: Tensor, role: ParamRole) -> Result<ParamId> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Config(format!("parameter `{name}` registered twice")));
        }
        let grad = Tensor::zeros(value.shape());
        let (idx, _) = self.entries.insert_full(name, Entry { value, grad, role });
        Ok(ParamId(idx))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).expect("valid ParamId").0
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].grad
    }

    pub fn role(&self, id: ParamId) -> ParamRole {
        self.entries[id.0].role
    }

    /// Overwrites a value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let e = &mut self.entries[id.0];
        if e.value.shape() != value.shape() {
            return Err(Error::shape(
                "set_value",
                format!("{:?} vs {:?}", e.value.shape(), value.shape()),
            ));
        }
        e.value = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, (name, e))| (ParamId(i), name.as_str(), &e.value))
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            e.grad.data_mut().fill(0.0);
        }
    }

    /// Total number of scalar values across all parameters.
    pub fn total_count(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    pub fn count_by_role(&self, role: ParamRole) -> usize {
        self.entries
            .values()
            .filter(|e| e.role == role)
            .map(|e| e.value.len())
            .sum()
    }

    /// Number of scalars whose name starts with `prefix`.
    pub fn count_with_prefix(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, e)| e.value.len())
            .sum()
    }
}
