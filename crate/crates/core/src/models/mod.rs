//! Sentence classifiers: a small BERT-style encoder with classification and
//! masked-LM heads, and a bidirectional LSTM baseline.

mod batch;
mod blstm;
mod config;
mod transformer;

pub use batch::{encode_batch, encode_words, EncodedBatch, WordBatch, WordVocab};
pub use blstm::{BlstmModel, EmbeddingSlot};
pub use config::{BlstmConfig, ModelConfig, INIT_STD, LAYER_NORM_EPS};
pub use transformer::{is_encoder_param, MlmOutput, TransformerModel};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::tensor::{CheckpointError, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("batch has no masked positions to predict")]
    NoMaskedPositions,
    #[error("batch carries no class targets")]
    NoClassTargets,
    #[error("incompatible checkpoint: {0}")]
    CheckpointIncompatible(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("word vectors line {line_no}: {reason}")]
    WordVectors { line_no: usize, reason: String },
}

pub(crate) fn normal_tensor(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("shape matches")
}

/// Inverted dropout: scales kept activations by `1 / (1 - rate)`.
pub(crate) fn dropout(
    tape: &mut Tape,
    x: Var,
    rate: f64,
    rng: Option<&mut rand_chacha::ChaCha8Rng>,
) -> Result<Var, TensorError> {
    let Some(rng) = rng else { return Ok(x) };
    if rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let shape = tape.shape(x).to_vec();
    let n: usize = shape.iter().product();
    let mask = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mask = tape.constant(Tensor::new(shape, mask)?);
    tape.mul(x, mask)
}

/// `x · w + b` over the last axis.
pub(crate) fn dense(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let y = tape.matmul(x, w)?;
    tape.add(y, b)
}

/// Layer norm followed by the learned scale and shift.
pub(crate) fn layer_norm_affine(tape: &mut Tape, x: Var, gamma: Var, beta: Var) -> Result<Var, TensorError> {
    let y = tape.layer_norm(x, LAYER_NORM_EPS)?;
    let y = tape.mul(y, gamma)?;
    tape.add(y, beta)
}
