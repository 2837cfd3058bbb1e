use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::table::FlowTable;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Row indices of a stratified train/test partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

/// `k` disjoint row-index sets covering the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// `(train rows, held-out rows)` for fold `i`, each ascending.
    pub fn partition(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        let mut test = self.folds[i].clone();
        test.sort_unstable();
        (train, test)
    }
}

/// Round-half-up of `n * ratio`, robust to `0.7 * 5 = 3.4999...`.
pub fn train_count(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio) + 0.5 + 1e-9).floor() as usize
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Members of each present class, sorted by content and then shuffled with
/// the class's own stream. Sorting first makes the draw independent of the
/// table's row order.
fn shuffled_classes(table: &FlowTable, seed: u64, min_rows: usize) -> Result<Vec<Vec<usize>>> {
    let labels = table.binary_labels()?;
    let root = Rng::new(seed);
    let mut out = Vec::new();
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < min_rows {
            return Err(Error::Stratification(format!(
                "class {class} has {} rows, need at least {min_rows}",
                idx.len()
            )));
        }
        idx.sort_by(|&a, &b| cmp_rows(table.row(a), table.row(b)));
        root.split(class as u64).shuffle(&mut idx);
        out.push(idx);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset("no rows to split".into()));
    }
    Ok(out)
}

/// Per class, `round_half_up(n_c * ratio)` rows go to training.
pub fn stratified_split(table: &FlowTable, ratio: f64, seed: u64) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Parameter(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in shuffled_classes(table, seed, 2)? {
        let k = train_count(idx.len(), ratio);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train,
        test,
        ratio,
        seed,
    })
}

/// Deals each class's shuffled rows round-robin onto the folds; the dealer
/// position carries over from one class to the next so fold sizes stay
/// within one of each other.
///
/// A class may be smaller than `k` (some folds then lack it), but it needs
/// two rows so that every training complement still contains it, and the
/// table needs at least `k` rows so that no fold is empty.
pub fn stratified_kfold(table: &FlowTable, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Parameter(format!("k-fold needs k >= 2, got {k}")));
    }
    if table.len() < k {
        return Err(Error::Stratification(format!(
            "{} rows cannot fill {k} folds",
            table.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for idx in shuffled_classes(table, seed, 2)? {
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds, seed })
}
