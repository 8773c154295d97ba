//! Evaluation: confusion matrices, support-weighted metrics and
//! per-language-group breakdowns.

mod groups;
mod metrics;
mod report;

pub use groups::{grouped_report, language_group, GroupThresholds, LanguageGroup, RatioDenominator};
pub use metrics::{confusion, metrics, ClassMetrics, ConfusionMatrix, EvalReport};
pub use report::{
    align_predictions, parse_predictions, write_predictions, EvaluationReport, REPORT_SCHEMA_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold and predicted sequences differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("confusion matrix has no counts")]
    EmptyMatrix,
    #[error("prediction line {line_no}: {reason}")]
    MalformedPrediction { line_no: usize, reason: String },
    #[error("no prediction for tweet `{0}`")]
    MissingPrediction(String),
    #[error("prediction for unknown tweet `{0}`")]
    UnknownTweet(String),
}
