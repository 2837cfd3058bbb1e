use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Provenance;
use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, CvResult, MetricSet};
use crate::optim::EpochRecord;

/// Decimal places kept for metrics in reports.
pub const REPORT_PLACES: i32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub rows: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

/// Machine-readable record of one run.
///
/// Serialized field order is fixed, so two runs with identical inputs give
/// byte-identical documents apart from `duration_seconds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Every effective setting of the run.
    pub config: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopped_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<Vec<FoldReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<MetricSet>,
    pub duration_seconds: f64,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            seed,
            provenance: None,
            config: BTreeMap::new(),
            confusion: None,
            metrics: None,
            history: Vec::new(),
            best_epoch: None,
            stopped_epoch: None,
            folds: None,
            means: None,
            duration_seconds: 0.0,
        }
    }

    pub fn with_evaluation(mut self, cm: ConfusionMatrix, m: &MetricSet) -> Self {
        self.confusion = Some(cm);
        self.metrics = Some(m.rounded(REPORT_PLACES));
        self
    }

    pub fn with_crossval(mut self, cv: &CvResult) -> Self {
        self.folds = Some(
            cv.folds
                .iter()
                .map(|f| FoldReport {
                    fold: f.fold,
                    rows: f.held_out.len(),
                    confusion: f.confusion,
                    metrics: f.metrics.rounded(REPORT_PLACES),
                    best_epoch: f.best_epoch,
                    stopped_epoch: f.stopped_epoch,
                })
                .collect(),
        );
        self.means = Some(cv.means.rounded(REPORT_PLACES));
        self
    }

    /// Inserts a config echo entry.
    pub fn echo(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("config values serialize");
        self.config.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
