use serde::{Deserialize, Serialize};

use crate::data::{stratified_split, FlowTable};
use crate::error::{Error, Result};
use crate::eval::{score, table_rows, MetricSet};
use crate::layers::Mode;
use crate::model::{HybridModel, ModelParams};
use crate::optim::{adam_step, weighted_bce_loss, AdamConfig, AdamState};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Which table early stopping watches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// A stratified slice carved from the training table.
    Validation,
    /// A separately supplied table, normally the held-out test split.
    Test,
}

impl std::str::FromStr for Monitor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "validation" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            _ => Err(Error::Config(format!("unknown monitor {s:?}; use validation or test"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub monitor: Monitor,
    pub patience: usize,
    pub restore_best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub early_stopping: EarlyStopping,
    pub validation_fraction: f64,
    pub shuffle_seed: u64,
    /// Multiplier on the attack-class loss terms; `None` means unweighted.
    pub pos_weight: Option<f64>,
    /// Decision threshold for the monitor metrics.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            max_epochs: 150,
            batch_size: 16,
            adam: AdamConfig::default(),
            early_stopping: EarlyStopping {
                monitor: Monitor::Validation,
                patience: 10,
                restore_best: true,
            },
            validation_fraction: 0.1,
            shuffle_seed: 42,
            pos_weight: None,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.early_stopping.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("positive weight must be > 0, got {w}"));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        self.adam.validate()
    }
}

/// Tracks the best monitored loss and counts non-improving epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Waiting,
    Stop,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Records the loss of `epoch` (1-based). Only a strict decrease counts as
    /// an improvement; `Stop` is returned once `patience` epochs in a row have
    /// failed to improve.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            Verdict::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Waiting
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-mode loss over the epoch's samples.
    pub train_loss: f64,
    /// Inference-mode loss on the monitor table.
    pub monitor_loss: f64,
    pub monitor_metrics: MetricSet,
}

#[derive(Clone, Debug)]
pub struct TrainRun<T = f64> {
    pub model: HybridModel<T>,
    pub history: Vec<EpochRecord>,
    /// Last epoch that ran (1-based).
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    /// True when early stopping ended the run before `max_epochs`.
    pub stopped_early: bool,
}

/// Trains on `table`, carving a stratified validation slice for early stopping.
pub fn train<T: Scalar>(model: HybridModel<T>, table: &FlowTable, cfg: &TrainConfig) -> Result<TrainRun<T>> {
    fit(model, table, None, cfg, &mut |_| {})
}

/// Trains on all of `train_table`, watching `monitor_table` for early stopping.
pub fn train_monitored<T: Scalar>(
    model: HybridModel<T>,
    train_table: &FlowTable,
    monitor_table: &FlowTable,
    cfg: &TrainConfig,
) -> Result<TrainRun<T>> {
    fit(model, train_table, Some(monitor_table), cfg, &mut |_| {})
}

/// The training loop. With `monitor = None` a validation slice of
/// `cfg.validation_fraction` is carved from `table`; `on_epoch` sees each
/// history record as it is produced.
pub fn fit<T: Scalar>(
    mut model: HybridModel<T>,
    table: &FlowTable,
    monitor: Option<&FlowTable>,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainRun<T>> {
    cfg.validate()?;
    if table.n_features() != model.input_features() {
        return Err(Error::Schema(format!(
            "model takes {} features, training table has {}",
            model.input_features(),
            table.n_features()
        )));
    }
    let [normal, attack] = table.class_counts()?;
    if normal == 0 || attack == 0 {
        return Err(Error::Data(format!(
            "training data needs both classes, found {normal} normal and {attack} attack rows"
        )));
    }

    let (train_t, monitor_t) = match monitor {
        Some(m) => (table.clone(), m.clone()),
        None => {
            if cfg.early_stopping.monitor == Monitor::Test {
                return Err(Error::Config(
                    "monitor = test needs a separate monitor table".into(),
                ));
            }
            let plan = stratified_split(table, 1.0 - cfg.validation_fraction, cfg.shuffle_seed)?;
            (table.subset(&plan.train), table.subset(&plan.test))
        }
    };
    if monitor_t.is_empty() {
        return Err(Error::Data(
            "validation slice is empty; raise validation_fraction or supply a monitor table".into(),
        ));
    }
    let [tn, ta] = train_t.class_counts()?;
    if tn == 0 || ta == 0 {
        return Err(Error::Data("a class is empty after the validation carve-out".into()));
    }

    let xs: Vec<Vec<T>> = table_rows(&train_t);
    let ys = train_t.binary_labels()?.to_vec();
    let mx: Vec<Vec<T>> = table_rows(&monitor_t);
    let my = monitor_t.binary_labels()?.to_vec();

    let root = Rng::new(cfg.shuffle_seed);
    let mut shuffle_rng = root.split(0);
    let mut dropout_rng = root.split(1);
    let pos_weight = cfg.pos_weight.unwrap_or(1.0);

    let mut adam = AdamState::new(&model.params.tensors());
    let mut stopper = EarlyStopper::new(cfg.early_stopping.patience);
    let mut best_params: Option<ModelParams<T>> = None;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let diverged = |detail: String| Error::Divergence {
                epoch,
                batch: b + 1,
                detail,
            };
            let numeric = |e: Error| match e {
                Error::NonFinite(d) => diverged(d),
                other => other,
            };
            let rows: Vec<&[T]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let labels: Vec<u8> = batch.iter().map(|&i| ys[i]).collect();
            let fwd = model
                .forward_batch(&rows, Mode::Train, &mut dropout_rng)
                .map_err(numeric)?;
            let (loss, dz) = weighted_bce_loss(&fwd.probabilities, &labels, pos_weight).map_err(numeric)?;
            if !loss.is_finite() {
                return Err(diverged(format!("loss is {loss}")));
            }
            loss_sum += loss * batch.len() as f64;
            let grads = fwd.backward(dz.data()).map_err(numeric)?;
            adam_step(
                &mut model.params.tensors_mut(),
                &grads.tensors(),
                &mut adam,
                cfg.learning_rate,
                &cfg.adam,
            )
            .map_err(numeric)?;
        }
        let train_loss = loss_sum / xs.len() as f64;

        let (_, metrics, _) = score(&model, &mx, &my, cfg.threshold)?;
        let monitor_loss = metrics.loss.expect("score reports a loss");
        if !monitor_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                detail: format!("monitor loss is {monitor_loss}"),
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            monitor_loss,
            monitor_metrics: metrics,
        };
        on_epoch(&record);
        history.push(record);

        match stopper.observe(epoch, monitor_loss) {
            Verdict::Improved => {
                if cfg.early_stopping.restore_best {
                    best_params = Some(model.params.clone());
                }
            }
            Verdict::Waiting => {}
            Verdict::Stop => {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }

    let stopped_epoch = history.len();
    if let Some(best) = best_params {
        model.params = best;
    }
    Ok(TrainRun {
        model,
        history,
        stopped_epoch,
        best_epoch: stopper.best_epoch(),
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopper_follows_patience() {
        let mut s = EarlyStopper::new(1);
        assert_eq!(s.observe(1, 0.5), Verdict::Improved);
        assert_eq!(s.observe(2, 0.6), Verdict::Stop);
        assert_eq!(s.best_epoch(), 1);

        let mut s = EarlyStopper::new(3);
        let losses = [0.9, 0.8, 0.85, 0.8, 0.7, 0.71, 0.72, 0.73, 0.1];
        let mut stop = None;
        for (e, &l) in losses.iter().enumerate() {
            if s.observe(e + 1, l) == Verdict::Stop {
                stop = Some(e + 1);
                break;
            }
        }
        // 0.8 at epoch 4 ties the best and does not count as improvement
        assert_eq!(stop, Some(8));
        assert_eq!(s.best_epoch(), 5);
    }

    #[test]
    fn stop_gap_never_exceeds_patience() {
        let mut rng = Rng::new(3);
        for patience in 1..6 {
            for _ in 0..100 {
                let mut s = EarlyStopper::new(patience);
                let mut stopped = None;
                for e in 1..=60 {
                    if s.observe(e, rng.uniform()) == Verdict::Stop {
                        stopped = Some(e);
                        break;
                    }
                }
                if let Some(e) = stopped {
                    assert_eq!(e - s.best_epoch(), patience);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.early_stopping.patience = 0;
        assert!(c.validate().is_err());
    }
}
