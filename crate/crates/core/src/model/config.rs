use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel_size: usize,
}

/// Shape of the two-branch network.
///
/// Defaults: three conv blocks of 64 filters with kernel 3, pool 2, stacked
/// LSTMs of 64 then 128 units, a 128-unit dense layer and dropout 0.4. The
/// conv geometry is a declared choice; the LSTM sizes, the block counts and
/// the dropout rate are the published hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub input_features: usize,
    pub conv_blocks: Vec<ConvSpec>,
    pub pool: usize,
    pub lstm_units: Vec<usize>,
    pub dense_units: usize,
    pub dropout_rate: f64,
}

/// Lengths along the CNN branch and the sizes of the merged features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeChain {
    /// `(conv output length, pool output length)` per block.
    pub stages: Vec<(usize, usize)>,
    pub cnn_feature: usize,
    pub lstm_feature: usize,
    pub merged: usize,
}

impl ArchitectureConfig {
    pub fn new(input_features: usize) -> Self {
        Self {
            input_features,
            conv_blocks: vec![
                ConvSpec {
                    filters: 64,
                    kernel_size: 3,
                };
                3
            ],
            pool: 2,
            lstm_units: vec![64, 128],
            dense_units: 128,
            dropout_rate: 0.4,
        }
    }

    /// Sets every conv block to the same geometry.
    pub fn with_conv(mut self, filters: usize, kernel_size: usize) -> Self {
        for b in &mut self.conv_blocks {
            *b = ConvSpec {
                filters,
                kernel_size,
            };
        }
        self
    }

    pub fn with_lstm_units(mut self, units: Vec<usize>) -> Self {
        self.lstm_units = units;
        self
    }

    pub fn with_dense_units(mut self, units: usize) -> Self {
        self.dense_units = units;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    /// Checks the configuration and walks the CNN shape chain.
    pub fn validate(&self) -> Result<ShapeChain> {
        if self.input_features == 0 {
            return Err(Error::Config("input_features must be positive".into()));
        }
        if self.conv_blocks.is_empty() {
            return Err(Error::Config("at least one conv block is required".into()));
        }
        if self.lstm_units.is_empty() || self.lstm_units.contains(&0) {
            return Err(Error::Config(format!(
                "LSTM units must be a non-empty list of positive sizes, got {:?}",
                self.lstm_units
            )));
        }
        if self.dense_units == 0 {
            return Err(Error::Config("dense_units must be positive".into()));
        }
        if self.pool < 2 {
            return Err(Error::Config(format!("pool must be >= 2, got {}", self.pool)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        let mut len = self.input_features;
        let mut stages = Vec::with_capacity(self.conv_blocks.len());
        for (i, b) in self.conv_blocks.iter().enumerate() {
            let stage = i + 1;
            if b.filters == 0 || b.kernel_size == 0 {
                return Err(Error::Config(format!(
                    "conv block {stage}: filters and kernel_size must be positive"
                )));
            }
            if len < b.kernel_size {
                return Err(Error::Config(format!(
                    "conv block {stage} receives sequence length {len} < kernel size {}",
                    b.kernel_size
                )));
            }
            let conv = len - b.kernel_size + 1;
            if conv < self.pool {
                return Err(Error::Config(format!(
                    "pool after conv block {stage} receives length {conv} < pool {}",
                    self.pool
                )));
            }
            len = conv / self.pool;
            stages.push((conv, len));
        }
        let cnn_feature = len * self.conv_blocks.last().map_or(0, |b| b.filters);
        let lstm_feature = *self.lstm_units.last().unwrap_or(&0);
        Ok(ShapeChain {
            stages,
            cnn_feature,
            lstm_feature,
            merged: cnn_feature + lstm_feature,
        })
    }
}
