//! Flow-table ingestion and preparation.

mod csv_io;
mod split;
mod synth;
mod table;
mod transform;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use csv_io::{
    load_csv, normalize_column_name, parse_csv, table_to_csv, write_csv, CsvOptions, DatasetPreset,
    IDENTIFIER_COLUMNS,
};
pub use split::{stratified_kfold, stratified_split, train_count, FoldPlan, SplitPlan};
pub use synth::{generate_synthetic, SynthConfig};
pub use table::{FlowTable, LabelColumn, Provenance};
pub use transform::{binarize_labels, clean, drop_incomplete_rows, minmax_apply, minmax_fit, FitScope, NormalizationSpec};

use crate::error::{Error, Result};

/// Load, clean and binarize in one go.
pub fn load_labeled(path: impl AsRef<Path>, opts: &CsvOptions, normal_label: &str) -> Result<FlowTable> {
    let raw = load_csv(path, opts)?;
    binarize_labels(clean(raw)?, normal_label)
}

/// Everything needed to turn raw CSV rows into model input, saved with a
/// trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub label_column: String,
    pub normal_label: String,
    pub drop_columns: Vec<String>,
    pub encodings: BTreeMap<String, Vec<String>>,
    pub normalization: NormalizationSpec,
}

impl Preprocessing {
    pub fn csv_options(&self, label_optional: bool) -> CsvOptions {
        CsvOptions {
            label_column: self.label_column.clone(),
            drop_columns: self.drop_columns.clone(),
            encodings: Some(self.encodings.clone()),
            label_optional,
        }
    }

    /// Selects the fitted feature columns (in fitted order) and scales them.
    /// Rows are kept as-is, so non-finite cells survive; callers decide what
    /// to do with them.
    pub fn apply(&self, raw: FlowTable) -> Result<FlowTable> {
        let names = &self.normalization.feature_names;
        let cols: Vec<usize> = names
            .iter()
            .map(|n| {
                raw.feature_names()
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::Schema(format!("input lacks feature column `{n}`")))
            })
            .collect::<Result<_>>()?;
        let (_, rows, labels, mut prov) = raw.into_parts();
        let rows = rows
            .into_iter()
            .map(|r| {
                cols.iter()
                    .enumerate()
                    .map(|(j, &c)| self.normalization.scale(j, r[c]))
                    .collect()
            })
            .collect();
        prov.steps.push("applied stored preprocessing".into());
        Ok(FlowTable::from_parts(names.clone(), rows, labels, prov))
    }
}
