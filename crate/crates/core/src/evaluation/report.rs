use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    confusion, grouped_report, metrics, ConfusionMatrix, EvalError, EvalReport, GroupThresholds,
    LanguageGroup,
};
use crate::corpus::{Corpus, SentimentLabel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Parses `<id>\t<sentiment>` lines. Blank lines are skipped.
pub fn parse_predictions(text: &str) -> Result<Vec<(String, SentimentLabel)>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EvalError::MalformedPrediction { line_no: i + 1, reason };
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `<id>\\t<sentiment>`".into()))?;
        let label = label.trim().parse().map_err(bad)?;
        out.push((id.to_string(), label));
    }
    Ok(out)
}

pub fn write_predictions(predictions: &[(String, SentimentLabel)]) -> String {
    let mut out = String::new();
    for (id, label) in predictions {
        let _ = writeln!(out, "{id}\t{label}");
    }
    out
}

/// Orders predictions like the gold corpus. Every gold tweet needs exactly
/// one prediction and every prediction must name a gold tweet.
pub fn align_predictions(
    gold: &Corpus,
    predictions: &[(String, SentimentLabel)],
) -> Result<Vec<SentimentLabel>, EvalError> {
    let mut by_id: HashMap<&str, SentimentLabel> = HashMap::with_capacity(predictions.len());
    for (i, (id, label)) in predictions.iter().enumerate() {
        if by_id.insert(id.as_str(), *label).is_some() {
            return Err(EvalError::MalformedPrediction {
                line_no: i + 1,
                reason: format!("duplicate prediction for `{id}`"),
            });
        }
    }
    let aligned = gold
        .tweets
        .iter()
        .map(|t| {
            by_id
                .remove(t.id.as_str())
                .ok_or_else(|| EvalError::MissingPrediction(t.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((&id, _)) = by_id.iter().min_by_key(|(id, _)| **id) {
        return Err(EvalError::UnknownTweet(id.to_string()));
    }
    Ok(aligned)
}

/// Everything the `evaluate` command emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub confusion: ConfusionMatrix,
    pub overall: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<BTreeMap<LanguageGroup, EvalReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_sizes: Option<BTreeMap<LanguageGroup, usize>>,
}

impl EvaluationReport {
    pub fn build(
        gold: &Corpus,
        pred: &[SentimentLabel],
        grouped: Option<&GroupThresholds>,
    ) -> Result<Self, EvalError> {
        let labels = gold.labels();
        let cm = confusion(&labels, pred)?;
        let overall = metrics(&cm)?;
        let groups = grouped
            .map(|th| grouped_report(&labels, pred, &gold.tweets, th))
            .transpose()?;
        let group_sizes = groups
            .as_ref()
            .map(|g| g.iter().map(|(k, r)| (*k, r.total)).collect());
        Ok(EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            confusion: cm,
            overall,
            groups,
            group_sizes,
        })
    }

    /// One `group,class,metric,value` row per number. Weighted metrics use
    /// the class `weighted`; the ungrouped report is the group `all`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,class,metric,value\n");
        let mut emit = |group: &str, report: &EvalReport| {
            for (metric, value) in [
                ("precision", report.weighted_precision),
                ("recall", report.weighted_recall),
                ("f1", report.weighted_f1),
                ("accuracy", report.accuracy),
            ] {
                let _ = writeln!(out, "{group},weighted,{metric},{value}");
            }
            let _ = writeln!(out, "{group},weighted,support,{}", report.total);
            for (label, m) in &report.per_class {
                for (metric, value) in [("precision", m.precision), ("recall", m.recall), ("f1", m.f1)] {
                    let _ = writeln!(out, "{group},{label},{metric},{value}");
                }
                let _ = writeln!(out, "{group},{label},support,{}", m.support);
            }
        };
        emit("all", &self.overall);
        for (group, report) in self.groups.iter().flatten() {
            emit(group.as_str(), report);
        }
        out
    }
}
