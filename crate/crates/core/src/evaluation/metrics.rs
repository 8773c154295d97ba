use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::SentimentLabel;

/// 3×3 counts, rows = gold, columns = predicted, in
/// negative / neutral / positive order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[usize; 3]; 3]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn correct(&self) -> usize {
        (0..3).map(|c| self.counts[c][c]).sum()
    }

    pub fn add(&mut self, gold: SentimentLabel, pred: SentimentLabel) {
        self.counts[gold.index()][pred.index()] += 1;
    }
}

pub fn confusion(gold: &[SentimentLabel], pred: &[SentimentLabel]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        cm.add(g, p);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: usize,
    pub per_class: BTreeMap<SentimentLabel, ClassMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and support-weighted metrics. Zero denominators give 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut per_class = BTreeMap::new();
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for label in SentimentLabel::ALL {
        let c = label.index();
        let tp = cm.counts[c][c];
        let support = cm.support(c);
        let precision = ratio(tp, cm.predicted(c));
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let w = support as f64;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.insert(label, ClassMetrics { precision, recall, f1, support });
    }
    let n_f = n as f64;
    Ok(EvalReport {
        weighted_precision: wp / n_f,
        weighted_recall: wr / n_f,
        weighted_f1: wf / n_f,
        accuracy: cm.correct() as f64 / n_f,
        total: n,
        per_class,
    })
}
