//! Loss, Adam, and the mini-batch training loop with early stopping.

mod adam;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{bce_loss, weighted_bce_loss, P_MIN};
pub use train::{
    fit, train, train_monitored, EarlyStopper, EarlyStopping, EpochRecord, Monitor, TrainConfig,
    TrainRun, Verdict,
};
