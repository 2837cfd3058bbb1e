use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts with attack (label 1) as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn record(&mut self, pred: u8, truth: u8) {
        match (pred, truth) {
            (1, 1) => self.true_pos += 1,
            (0, 0) => self.true_neg += 1,
            (1, 0) => self.false_pos += 1,
            _ => self.false_neg += 1,
        }
    }
}

/// Classification metrics in percent, plus the mean loss when known.
///
/// A metric whose denominator is zero is reported as 0 and its name is listed
/// in `degenerate`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

fn round_to(v: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (v * s).round() / s
}

impl MetricSet {
    /// Copy with every value rounded to `places` decimals.
    pub fn rounded(&self, places: i32) -> Self {
        Self {
            accuracy: round_to(self.accuracy, places),
            precision: round_to(self.precision, places),
            recall: round_to(self.recall, places),
            f1: round_to(self.f1, places),
            loss: self.loss.map(|l| round_to(l, places)),
            degenerate: self.degenerate.clone(),
        }
    }

    /// Unweighted average of each field.
    pub fn mean(sets: &[MetricSet]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Input("cannot average zero metric sets".into()));
        }
        let n = sets.len() as f64;
        let avg = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
        let loss = if sets.iter().all(|s| s.loss.is_some()) {
            Some(sets.iter().map(|s| s.loss.unwrap()).sum::<f64>() / n)
        } else {
            None
        };
        let mut degenerate: Vec<String> = sets.iter().flat_map(|s| s.degenerate.clone()).collect();
        degenerate.sort();
        degenerate.dedup();
        Ok(Self {
            accuracy: avg(|s| s.accuracy),
            precision: avg(|s| s.precision),
            recall: avg(|s| s.recall),
            f1: avg(|s| s.f1),
            loss,
            degenerate,
        })
    }
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        if p > 1 || t > 1 {
            return Err(Error::Input(format!("non-binary value at position {i}: pred {p}, truth {t}")));
        }
        cm.record(p, t);
    }
    Ok(cm)
}

/// Accuracy, precision, recall and F1 as percentages.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Input("confusion matrix is empty".into()));
    }
    let mut degenerate = Vec::new();
    let mut ratio = |num: u64, den: u64, name: &str| {
        if den == 0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio(cm.true_pos + cm.true_neg, total, "accuracy");
    let precision = ratio(cm.true_pos, cm.true_pos + cm.false_pos, "precision");
    let recall = ratio(cm.true_pos, cm.true_pos + cm.false_neg, "recall");
    let f1 = if precision + recall == 0.0 {
        degenerate.push("f1".into());
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricSet {
        accuracy: 100.0 * accuracy,
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f1: 100.0 * f1,
        loss: None,
        degenerate,
    })
}

/// F1 (percent) from precision and recall given in percent.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
