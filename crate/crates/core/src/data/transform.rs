use serde::{Deserialize, Serialize};

use crate::data::table::{FlowTable, LabelColumn};
use crate::error::{Error, Result};

/// Drops rows with any non-finite or missing cell, including a blank raw
/// label. Columns are left alone.
pub fn drop_incomplete_rows(table: FlowTable) -> Result<FlowTable> {
    let (names, rows, labels, mut prov) = table.into_parts();
    let n0 = rows.len();
    let keep: Vec<usize> = (0..n0)
        .filter(|&i| {
            rows[i].iter().all(|v| v.is_finite())
                && match &labels {
                    LabelColumn::Raw(l) => !l[i].trim().is_empty(),
                    LabelColumn::Binary(_) => true,
                }
        })
        .collect();
    let dropped = n0 - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "all {n0} rows contain missing or non-finite values"
        )));
    }
    let rows: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
    let labels = match labels {
        LabelColumn::Raw(l) => LabelColumn::Raw(keep.iter().map(|&i| l[i].clone()).collect()),
        LabelColumn::Binary(l) => LabelColumn::Binary(keep.iter().map(|&i| l[i]).collect()),
    };
    if dropped > 0 {
        prov.steps.push(format!("dropped {dropped} incomplete rows"));
    }
    prov.rows_dropped += dropped;
    Ok(FlowTable::from_parts(names, rows, labels, prov))
}

/// [`drop_incomplete_rows`], then drops constant feature columns.
pub fn clean(table: FlowTable) -> Result<FlowTable> {
    let (names, rows, labels, mut prov) = drop_incomplete_rows(table)?.into_parts();
    let constant: Vec<usize> = (0..names.len())
        .filter(|&c| rows.iter().all(|r| r[c] == rows[0][c]))
        .collect();
    let kept_cols: Vec<usize> = (0..names.len()).filter(|c| !constant.contains(c)).collect();
    if kept_cols.is_empty() {
        return Err(Error::EmptyDataset("every feature column is constant".into()));
    }
    let constant_names: Vec<String> = constant.iter().map(|&c| names[c].clone()).collect();
    let names = kept_cols.iter().map(|&c| names[c].clone()).collect();
    let rows = rows
        .into_iter()
        .map(|r| kept_cols.iter().map(|&c| r[c]).collect())
        .collect();

    if !constant_names.is_empty() {
        prov.steps.push(format!("dropped {} constant columns", constant_names.len()));
    }
    prov.constant_columns.extend(constant_names);
    Ok(FlowTable::from_parts(names, rows, labels, prov))
}

/// `normal_label` (case-insensitive) becomes 0, anything else 1. Tables that
/// are already binary, or whose raw labels are all `0`/`1`, pass through.
pub fn binarize_labels(table: FlowTable, normal_label: &str) -> Result<FlowTable> {
    let (names, rows, labels, mut prov) = table.into_parts();
    let raw = match labels {
        LabelColumn::Binary(_) => return Ok(FlowTable::from_parts(names, rows, labels, prov)),
        LabelColumn::Raw(r) => r,
    };
    let already_binary = raw.iter().all(|l| l == "0" || l == "1");
    let bin: Vec<u8> = if already_binary {
        raw.iter().map(|l| u8::from(l == "1")).collect()
    } else {
        raw.iter()
            .map(|l| u8::from(!l.trim().eq_ignore_ascii_case(normal_label)))
            .collect()
    };
    let normals = bin.iter().filter(|&&b| b == 0).count();
    if normals == 0 {
        prov.warnings
            .push(format!("no row carries the normal label `{normal_label}`"));
    }
    prov.steps.push(format!(
        "binarized labels: {normals} normal (0), {} attack (1)",
        bin.len() - normals
    ));
    Ok(FlowTable::from_parts(names, rows, LabelColumn::Binary(bin), prov))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    TrainOnly,
    WholeDataset,
}

/// Per-feature `(min, max)` for min-max scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub feature_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub fit_scope: FitScope,
}

pub fn minmax_fit(table: &FlowTable, scope: FitScope) -> Result<NormalizationSpec> {
    if table.is_empty() {
        return Err(Error::EmptyDataset("cannot fit normalization on an empty table".into()));
    }
    let f = table.n_features();
    let mut min = vec![f64::INFINITY; f];
    let mut max = vec![f64::NEG_INFINITY; f];
    for row in table.rows() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data("normalization fit on a non-finite cell; clean first".into()));
            }
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormalizationSpec {
        feature_names: table.feature_names().to_vec(),
        min,
        max,
        fit_scope: scope,
    })
}

impl NormalizationSpec {
    /// `(x - min) / (max - min)`, or 0 where `max == min`. Not clamped.
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (v - self.min[j]) / range
        } else {
            0.0
        }
    }
}

/// Applies `spec`; values outside the fitted range extrapolate past [0, 1].
pub fn minmax_apply(spec: &NormalizationSpec, table: FlowTable) -> Result<FlowTable> {
    if spec.feature_names != table.feature_names() {
        return Err(Error::Schema(format!(
            "normalization fitted on {:?}, table has {:?}",
            spec.feature_names,
            table.feature_names()
        )));
    }
    let (names, rows, labels, mut prov) = table.into_parts();
    let rows = rows
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, &v)| spec.scale(j, v)).collect())
        .collect();
    prov.steps.push(format!(
        "min-max normalized {} features ({:?} fit)",
        names.len(),
        spec.fit_scope
    ));
    Ok(FlowTable::from_parts(names, rows, labels, prov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<f64>>, labels: &[&str]) -> FlowTable {
        let f = rows[0].len();
        FlowTable::new(
            (0..f).map(|i| format!("c{i}")).collect(),
            rows,
            LabelColumn::Raw(labels.iter().map(|s| s.to_string()).collect()),
        )
        .unwrap()
    }

    #[test]
    fn nan_row_is_removed() {
        let t = table(
            vec![vec![1.0, 2.0], vec![f64::NAN, 3.0], vec![4.0, 5.0]],
            &["a", "b", "c"],
        );
        let c = clean(t).unwrap();
        assert_eq!(c.rows(), &[vec![1.0, 2.0], vec![4.0, 5.0]]);
        assert_eq!(c.provenance.rows_dropped, 1);
    }

    #[test]
    fn constant_column_is_removed() {
        let t = table(vec![vec![7.0, 1.0], vec![7.0, 2.0]], &["a", "b"]);
        let c = clean(t).unwrap();
        assert_eq!(c.feature_names(), &["c1".to_string()]);
        assert_eq!(c.provenance.constant_columns, vec!["c0".to_string()]);
    }

    #[test]
    fn clean_is_a_no_op_on_good_tables_and_idempotent() {
        let t = table(vec![vec![1.0, 2.0], vec![3.0, 4.0]], &["a", "b"]);
        let once = clean(t.clone()).unwrap();
        assert_eq!(once.rows(), t.rows());
        assert_eq!(once.feature_names(), t.feature_names());
        let twice = clean(once.clone()).unwrap();
        assert_eq!(twice.rows(), once.rows());
        assert_eq!(twice.feature_names(), once.feature_names());
    }

    #[test]
    fn all_rows_bad_is_empty_dataset() {
        let t = table(vec![vec![f64::NAN], vec![f64::INFINITY]], &["a", "b"]);
        assert!(matches!(clean(t), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn binarize_examples() {
        let t = table(vec![vec![0.0]; 3], &["NORMAL", "MITM_DOS", "STOP_APP"]);
        let b = binarize_labels(t, "NORMAL").unwrap();
        assert_eq!(b.binary_labels().unwrap(), &[0, 1, 1]);
        let again = binarize_labels(b.clone(), "NORMAL").unwrap();
        assert_eq!(again.binary_labels().unwrap(), b.binary_labels().unwrap());

        let t = table(vec![vec![0.0]; 2], &["normal", "Normal"]);
        assert_eq!(binarize_labels(t, "NORMAL").unwrap().binary_labels().unwrap(), &[0, 0]);

        let t = table(vec![vec![0.0]; 3], &["1", "0", "1"]);
        assert_eq!(binarize_labels(t, "NORMAL").unwrap().binary_labels().unwrap(), &[1, 0, 1]);
    }

    #[test]
    fn attack_only_slice_warns() {
        let t = table(vec![vec![0.0]; 2], &["DOS", "DOS"]);
        let b = binarize_labels(t, "NORMAL").unwrap();
        assert_eq!(b.provenance.warnings.len(), 1);
    }

    #[test]
    fn minmax_examples() {
        let t = table(vec![vec![2.0, 5.0], vec![4.0, 5.0], vec![6.0, 5.0]], &["a", "b", "c"]);
        let spec = minmax_fit(&t, FitScope::TrainOnly).unwrap();
        let n = minmax_apply(&spec, t).unwrap();
        let col0: Vec<f64> = n.rows().iter().map(|r| r[0]).collect();
        let col1: Vec<f64> = n.rows().iter().map(|r| r[1]).collect();
        assert_eq!(col0, vec![0.0, 0.5, 1.0]);
        assert_eq!(col1, vec![0.0; 3]);
        let out = table(vec![vec![8.0, 5.0]], &["a"]);
        assert_eq!(minmax_apply(&spec, out).unwrap().rows()[0][0], 1.5);
    }

    #[test]
    fn schema_mismatch() {
        let t = table(vec![vec![1.0, 2.0], vec![2.0, 3.0]], &["a", "b"]);
        let spec = minmax_fit(&t, FitScope::TrainOnly).unwrap();
        let other = FlowTable::new(
            vec!["x".into(), "y".into()],
            vec![vec![1.0, 2.0]],
            LabelColumn::Raw(vec!["a".into()]),
        )
        .unwrap();
        assert!(matches!(minmax_apply(&spec, other), Err(Error::Schema(_))));
    }
}
