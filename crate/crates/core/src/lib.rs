//! A hybrid CNN + LSTM binary intrusion detector for SCADA flow statistics,
//! written against plain `Vec` storage with hand-derived backpropagation.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.
//!
//! ```
//! use gridsentry::{generate_synthetic, ArchitectureConfig, Model64, SynthConfig};
//!
//! let table = generate_synthetic(&SynthConfig { n_normal: 4, n_attack: 4, features: 22, ..Default::default() })?;
//! let model = Model64::build(ArchitectureConfig::new(22).with_conv(4, 2), 7)?;
//! let p = model.probability(table.row(0))?;
//! assert!((0.0..=1.0).contains(&p));
//! # Ok::<(), gridsentry::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
mod kernels;
pub mod layers;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use data::{
    binarize_labels, clean, generate_synthetic, load_csv, load_labeled, minmax_apply, minmax_fit,
    stratified_kfold, stratified_split, CsvOptions, DatasetPreset, FitScope, FlowTable,
    NormalizationSpec, Preprocessing, SynthConfig,
};
pub use error::{Error, ErrorClass, LoadError, Result};
pub use eval::{confusion, crossval, evaluate, metrics, ConfusionMatrix, CvResult, MetricSet, Report};
pub use layers::Mode;
pub use model::{load_model, save_model, ArchitectureConfig, HybridModel, ModelParams};
pub use optim::{train, train_monitored, TrainConfig, TrainRun};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Model64 = HybridModel<f64>;
pub type Model32 = HybridModel<f32>;
pub type Params64 = ModelParams<f64>;
pub type Params32 = ModelParams<f32>;
pub type TrainRun64 = TrainRun<f64>;
pub type TrainRun32 = TrainRun<f32>;
