//! Confusion counts, percentage metrics, cross-validation and JSON reports.

mod metrics;
mod report;

pub use metrics::{confusion, f1_from, metrics, ConfusionMatrix, MetricSet};
pub use report::{read_report, write_report, FoldReport, Report, REPORT_PLACES};

use crate::data::{minmax_apply, minmax_fit, stratified_kfold, FitScope, FlowTable};
use crate::error::{Error, Result};
use crate::model::{ArchitectureConfig, HybridModel};
use crate::optim::{bce_loss, fit, Monitor, TrainConfig};
use crate::scalar::Scalar;

/// Feature rows converted to the model's scalar type.
pub(crate) fn table_rows<T: Scalar>(table: &FlowTable) -> Vec<Vec<T>> {
    table
        .rows()
        .iter()
        .map(|r| r.iter().map(|&v| T::lit(v)).collect())
        .collect()
}

/// Inference over prepared rows: confusion counts, metrics with mean BCE, and
/// the per-row probabilities.
pub(crate) fn score<T: Scalar>(
    model: &HybridModel<T>,
    rows: &[Vec<T>],
    labels: &[u8],
    threshold: f64,
) -> Result<(ConfusionMatrix, MetricSet, Vec<T>)> {
    let probs = model.probabilities(rows)?;
    let pred: Vec<u8> = probs.iter().map(|p| u8::from(p.as_f64() >= threshold)).collect();
    let cm = confusion(&pred, labels)?;
    let mut m = metrics(&cm)?;
    m.loss = Some(bce_loss(&probs, labels)?.0);
    Ok((cm, m, probs))
}

/// Scores `table` (already normalized with the training statistics).
pub fn evaluate<T: Scalar>(
    model: &HybridModel<T>,
    table: &FlowTable,
    threshold: f64,
) -> Result<(ConfusionMatrix, MetricSet)> {
    if table.n_features() != model.input_features() {
        return Err(Error::Schema(format!(
            "model takes {} features, table has {}",
            model.input_features(),
            table.n_features()
        )));
    }
    let (cm, m, _) = score(model, &table_rows(table), table.binary_labels()?, threshold)?;
    Ok((cm, m))
}

/// Inference-mode attack probabilities for every row of `table`.
pub fn probabilities<T: Scalar>(model: &HybridModel<T>, table: &FlowTable) -> Result<Vec<T>> {
    if table.n_features() != model.input_features() {
        return Err(Error::Schema(format!(
            "model takes {} features, table has {}",
            model.input_features(),
            table.n_features()
        )));
    }
    model.probabilities(&table_rows(table))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    /// Row indices of the held-out fold in the input table.
    pub held_out: Vec<usize>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Unweighted fold averages.
    pub means: MetricSet,
}

/// Stratified k-fold cross-validation on a cleaned, binarized, unnormalized
/// table. Each fold refits min-max scaling on its training folds and trains a
/// fresh model seeded with `seed + fold`.
pub fn crossval<T: Scalar>(
    table: &FlowTable,
    arch: &ArchitectureConfig,
    train_cfg: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    crossval_with::<T>(table, arch, train_cfg, k, seed, &mut |_, _| {})
}

/// [`crossval`] reporting each finished fold to `on_fold(fold, result)`.
pub fn crossval_with<T: Scalar>(
    table: &FlowTable,
    arch: &ArchitectureConfig,
    train_cfg: &TrainConfig,
    k: usize,
    seed: u64,
    on_fold: &mut dyn FnMut(usize, &FoldResult),
) -> Result<CvResult> {
    if arch.input_features != table.n_features() {
        return Err(Error::Schema(format!(
            "architecture takes {} features, table has {}",
            arch.input_features,
            table.n_features()
        )));
    }
    arch.validate()?;
    train_cfg.validate()?;
    let plan = stratified_kfold(table, k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for i in 0..k {
        let (train_idx, test_idx) = plan.partition(i);
        let fold_seed = seed.wrapping_add(i as u64);
        let train_raw = table.subset(&train_idx);
        let spec = minmax_fit(&train_raw, FitScope::TrainOnly)?;
        let train_t = minmax_apply(&spec, train_raw)?;
        let test_t = minmax_apply(&spec, table.subset(&test_idx))?;

        let mut cfg = train_cfg.clone();
        cfg.shuffle_seed = fold_seed;
        let model = HybridModel::<T>::build(arch.clone(), fold_seed)?;
        let monitor = match cfg.early_stopping.monitor {
            Monitor::Test => Some(&test_t),
            Monitor::Validation => None,
        };
        let run = fit(model, &train_t, monitor, &cfg, &mut |_| {})?;
        let (cm, m) = evaluate(&run.model, &test_t, cfg.threshold)?;
        let result = FoldResult {
            fold: i,
            held_out: test_idx,
            confusion: cm,
            metrics: m,
            best_epoch: run.best_epoch,
            stopped_epoch: run.stopped_epoch,
        };
        on_fold(i, &result);
        folds.push(result);
    }
    let sets: Vec<MetricSet> = folds.iter().map(|f| f.metrics.clone()).collect();
    Ok(CvResult {
        k,
        seed,
        means: MetricSet::mean(&sets)?,
        folds,
    })
}
