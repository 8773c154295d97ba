//! Optimizers, masked-LM batch preparation and the fine-tuning loops,
//! including two-step (masked-LM, then classification) fine-tuning.

mod masking;
mod optimizer;
mod plan;
mod run;

pub use masking::{apply_mlm_masking, masked_count};
pub use optimizer::{sgd_step, AdamConfig, OptimizerState};
pub use plan::{merge, parse_document, InitSource, Objective, OptimizerKind, TrainPlan};
pub use run::{
    head_seed, predict_blstm, predict_transformer, train, train_blstm, train_transformer, two_step_finetune,
    BlstmTrainer, DevSnapshot, EpochLog, ModelKind, RunLog, TrainedModel, TransformerTrainer, TwoStepOutcome,
    RUN_LOG_SCHEMA_VERSION,
};

use thiserror::Error;

use crate::evaluation::EvalError;
use crate::models::ModelError;
use crate::tensor::{CheckpointError, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training plan: {0}")]
    InvalidPlan(String),
    #[error("no maskable positions in batch")]
    NoEligiblePositions,
    #[error("training corpus is empty")]
    EmptyTrainingSet,
    #[error("a transformer run needs a subword vocabulary")]
    MissingVocab,
    #[error("encoder digest after load {loaded} differs from checkpoint {stored}")]
    DigestMismatch { stored: String, loaded: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
