use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label column before or after binarization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Raw(Vec<String>),
    /// `0` = normal, `1` = attack.
    Binary(Vec<u8>),
}

impl LabelColumn {
    pub fn len(&self) -> usize {
        match self {
            LabelColumn::Raw(v) => v.len(),
            LabelColumn::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Self {
        match self {
            LabelColumn::Raw(v) => LabelColumn::Raw(idx.iter().map(|&i| v[i].clone()).collect()),
            LabelColumn::Binary(v) => LabelColumn::Binary(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// What happened to a table on its way from the source file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    /// Human-readable log, one entry per transform.
    pub steps: Vec<String>,
    /// Categorical columns: code `k` stands for `encodings[col][k]`.
    pub encodings: BTreeMap<String, Vec<String>>,
    pub dropped_columns: Vec<String>,
    pub constant_columns: Vec<String>,
    pub rows_dropped: usize,
    pub warnings: Vec<String>,
}

/// Labeled flow records: `n` rows of `F` features plus one label each.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTable {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: LabelColumn,
    pub provenance: Provenance,
}

impl FlowTable {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: LabelColumn) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != feature_names.len()) {
            return Err(Error::Data(format!(
                "row {i} has {} values for {} features",
                rows[i].len(),
                feature_names.len()
            )));
        }
        if let LabelColumn::Binary(v) = &labels {
            if let Some(bad) = v.iter().find(|&&l| l > 1) {
                return Err(Error::Label(format!("binary label {bad}")));
            }
        }
        Ok(Self {
            feature_names,
            rows,
            labels,
            provenance: Provenance::default(),
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &LabelColumn {
        &self.labels
    }

    /// Labels as `0/1`; errors if the table has not been binarized.
    pub fn binary_labels(&self) -> Result<&[u8]> {
        match &self.labels {
            LabelColumn::Binary(v) => Ok(v),
            LabelColumn::Raw(_) => Err(Error::Label(
                "labels are not binarized yet".into(),
            )),
        }
    }

    /// Row counts of class 0 and class 1.
    pub fn class_counts(&self) -> Result<[usize; 2]> {
        let mut c = [0, 0];
        for &l in self.binary_labels()? {
            c[l as usize] += 1;
        }
        Ok(c)
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self.labels.select(idx),
            provenance: self.provenance.clone(),
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<Vec<f64>>, LabelColumn, Provenance) {
        (self.feature_names, self.rows, self.labels, self.provenance)
    }

    pub(crate) fn from_parts(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: LabelColumn,
        provenance: Provenance,
    ) -> Self {
        Self {
            feature_names,
            rows,
            labels,
            provenance,
        }
    }
}
