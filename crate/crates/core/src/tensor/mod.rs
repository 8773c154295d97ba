//! Dense `f64` tensors with a tape-based reverse-mode differentiator.
//!
//! Values live in [`Tensor`]s (row-major, shape + flat data). A forward pass
//! records every operation on a [`Tape`], which hands out copyable [`Var`]
//! handles. [`Tape::backward`] walks the tape in reverse and returns a
//! [`Gradients`] table with one entry per recorded node.
//!
//! ```
//! use codemix::tensor::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[6.0]);
//! ```

mod checkpoint;
mod gradcheck;
mod params;
mod tape;

pub use checkpoint::{Checkpoint, CheckpointError, ParamEntry, CHECKPOINT_SCHEMA_VERSION};
pub use gradcheck::{gradcheck, GradcheckReport, FD_FLOOR, FD_STEP};
pub use params::ParamSet;
pub use tape::{Gradients, Tape, Var};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch, got {got:?}, expected {expected}")]
    ShapeMismatch {
        op: &'static str,
        got: Vec<usize>,
        expected: String,
    },
    #[error("{0}: produced a non-finite value")]
    NonFinite(&'static str),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalarLoss(Vec<usize>),
    #[error("{op}: index {index} out of range for extent {extent}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("cross_entropy: no positions carry a target")]
    NoTargets,
}

pub(crate) fn mismatch(op: &'static str, got: &[usize], expected: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        got: got.to_vec(),
        expected: expected.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(mismatch("tensor", &shape, "positive extents"));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(mismatch("tensor", &[data.len()], format!("{n} values for shape {shape:?}")));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// A rank-0 tensor.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of a tensor viewed as `[rows, last_dim]`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = *self.shape.last().unwrap_or(&1);
        &self.data[i * w..(i + 1) * w]
    }
}
