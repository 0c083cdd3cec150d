use std::collections::HashMap;

use super::checkpoint::{CheckpointEntry, CheckpointError};
use super::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of learnable tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Panics on a duplicate name; parameter layouts are fixed at model build time.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = ParamId(self.tensors.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(value);
        id
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Total number of scalar coordinates.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_all(&mut self) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn entries(&self) -> Vec<CheckpointEntry> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| CheckpointEntry {
                name: n.clone(),
                shape: t.shape(),
                data: t.to_f64_vec(),
            })
            .collect()
    }

    /// Overwrites every parameter from checkpoint entries with matching names and shapes.
    pub fn load_entries(&mut self, entries: &[CheckpointEntry]) -> Result<(), CheckpointError> {
        let by_name: HashMap<&str, &CheckpointEntry> = entries.iter().map(|e| (e.name.as_str(), e)).collect();
        for (name, t) in self.names.iter().zip(self.tensors.iter_mut()) {
            let e = by_name
                .get(name.as_str())
                .ok_or_else(|| CheckpointError::Schema(format!("missing tensor {name}")))?;
            if e.shape != t.shape() {
                return Err(CheckpointError::Schema(format!(
                    "tensor {name}: expected {}, found {}",
                    t.shape(),
                    e.shape
                )));
            }
            *t = Tensor::from_f64(e.shape.rows, e.shape.cols, &e.data);
        }
        Ok(())
    }
}
