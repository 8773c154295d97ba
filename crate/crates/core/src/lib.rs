//! Code-mixed (English–Spanish) tweet sentiment analysis built from scratch.
//!
//! The crate covers the whole experiment loop:
//!
//! * [`corpus`]: reading, writing, splitting and summarizing SentiMix-style
//!   corpora with token-level language tags.
//! * [`subword`]: WordPiece / SentencePiece style greedy segmentation and the
//!   non-first-token measure of tokenizer fit.
//! * [`tensor`]: `f64` tensors with reverse-mode differentiation.
//! * [`models`]: a small BERT-style encoder with classification and masked
//!   language model heads, and a BLSTM baseline over stacked word embeddings.
//! * [`training`]: Adam, MLM masking, fine-tuning and two-step fine-tuning.
//! * [`evaluation`]: weighted precision / recall / F1 and per-language-group
//!   reports.
//! * [`synthetic`]: a seeded generator of code-mixed corpora with planted
//!   sentiment words, for experiments without the shared-task data.
//! * [`cli`]: the `codemix` command-line runner.

pub mod cli;
pub mod corpus;
pub mod subword;
pub mod synthetic;
pub mod tensor;
pub mod evaluation;
pub mod models;
pub mod training;
