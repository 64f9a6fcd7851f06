//! Small deterministic numeric core: dense `f64` tensors, named parameter
//! sets with paired gradients, and the training primitives the classifiers use.

mod checkpoint;
mod embedding;
mod gradcheck;
pub(crate) mod linalg;
mod ops;
mod optim;

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, FORMAT_VERSION};
pub use embedding::{load_embeddings, EmbeddingTable};
pub use gradcheck::{grad_check, GradCheckConfig};
pub use ops::{dropout, dropout_backward, softmax, softmax_xent, Xent};
pub use optim::{RmsProp, RMSPROP_DECAY, RMSPROP_EPSILON};

/// The random generator threaded through initialization, shuffling and dropout.
pub type SeededRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("duplicate parameter {0:?}")]
    DuplicateParam(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("class index {gold} out of range for {classes} classes")]
    ClassOutOfRange { gold: usize, classes: usize },
    #[error("dropout ratio must be in [0, 1), got {0}")]
    DropoutRatio(f64),
    #[error("invalid optimizer setting: {0}")]
    Optimizer(String),
    #[error("embeddings line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != data.len() || shape.contains(&0) {
            return Err(NnError::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn uniform(shape: &[usize], scale: f64, rng: &mut SeededRng) -> Self {
        let mut t = Tensor::zeros(shape);
        for v in &mut t.data {
            *v = rng.gen_range(-scale..scale);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

/// Named parameters with gradient buffers of identical shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    values: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<(), NnError> {
        if self.values.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        self.grads
            .insert(name.to_string(), Tensor::zeros(value.shape()));
        self.values.insert(name.to_string(), value);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, name: &str) -> Result<&Tensor, NnError> {
        self.values
            .get(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        self.values
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor, NnError> {
        self.grads
            .get(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        self.grads
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    /// Values and gradients borrowed at once, for backward passes.
    pub fn split_mut(&mut self) -> (&BTreeMap<String, Tensor>, &mut BTreeMap<String, Tensor>) {
        (&self.values, &mut self.grads)
    }

    /// `(name, value, grad)` triples in name order.
    pub fn pairs_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor, &mut Tensor)> {
        self.values
            .iter_mut()
            .zip(self.grads.iter_mut())
            .map(|((name, v), (_, g))| (name.as_str(), v, g))
    }

    pub fn values(&self) -> &BTreeMap<String, Tensor> {
        &self.values
    }

    pub fn grads(&self) -> &BTreeMap<String, Tensor> {
        &self.grads
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Total number of scalar parameters.
    pub fn size(&self) -> usize {
        self.values.values().map(Tensor::len).sum()
    }

    /// Replaces every value with one of the same shape from `other`.
    pub fn load_values(&mut self, other: &BTreeMap<String, Tensor>) -> Result<(), NnError> {
        for (name, value) in self.values.iter_mut() {
            let incoming = other
                .get(name)
                .ok_or_else(|| NnError::UnknownParam(name.clone()))?;
            if incoming.shape() != value.shape() {
                return Err(NnError::ShapeMismatch {
                    name: name.clone(),
                    expected: value.shape().to_vec(),
                    found: incoming.shape().to_vec(),
                });
            }
            *value = incoming.clone();
        }
        if let Some(extra) = other.keys().find(|k| !self.values.contains_key(*k)) {
            return Err(NnError::UnknownParam(extra.clone()));
        }
        Ok(())
    }
}

/// Forward-pass mode. Dropout draws from the generator only in training.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut SeededRng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_checks() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::from_vec(&[2, 3], vec![0.0; 5]),
            Err(NnError::DataLength { .. })
        ));
    }

    #[test]
    fn paramset_grads_mirror_values() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::zeros(&[3, 2])).unwrap();
        assert_eq!(p.grad("w").unwrap().shape(), &[3, 2]);
        assert!(matches!(
            p.insert("w", Tensor::zeros(&[1])),
            Err(NnError::DuplicateParam(_))
        ));
        assert!(p.value("missing").is_err());
    }
}
