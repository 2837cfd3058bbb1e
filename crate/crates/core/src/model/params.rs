use crate::error::{Error, Result};
use crate::layers::{lstm_named, ConvBlockParams, DenseParams, LstmParams};
use crate::model::config::ArchitectureConfig;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Every trainable array of the network.
///
/// Canonical names, in order:
///
/// ```text
/// conv{k}.kernels, conv{k}.bias                 k = 1..=conv blocks
/// lstm{k}.{w,u,b}_{i,f,o,c}                     k = 1..=LSTM layers, gate-major
/// dense.weights, dense.bias
/// output.weights, output.bias
/// ```
///
/// Gradients and optimizer moments use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f64> {
    pub conv: Vec<ConvBlockParams<T>>,
    pub lstm: Vec<LstmParams<T>>,
    pub dense: DenseParams<T>,
    pub output: DenseParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Zero-filled parameters for a validated config.
    pub fn zeros(cfg: &ArchitectureConfig) -> Result<Self> {
        let chain = cfg.validate()?;
        let mut conv = Vec::new();
        let mut cin = 1;
        for b in &cfg.conv_blocks {
            conv.push(ConvBlockParams::zeros(b.filters, b.kernel_size, cin));
            cin = b.filters;
        }
        let mut lstm = Vec::new();
        let mut d = 1;
        for &h in &cfg.lstm_units {
            lstm.push(LstmParams::zeros(h, d));
            d = h;
        }
        Ok(Self {
            conv,
            lstm,
            dense: DenseParams::zeros(cfg.dense_units, chain.merged),
            output: DenseParams::zeros(1, cfg.dense_units),
        })
    }

    /// Glorot-uniform weights and zero biases, drawn in canonical order from
    /// one stream.
    pub fn init(cfg: &ArchitectureConfig, rng: &mut Rng) -> Result<Self> {
        let chain = cfg.validate()?;
        let mut conv = Vec::new();
        let mut cin = 1;
        for b in &cfg.conv_blocks {
            conv.push(ConvBlockParams::init(rng, b.filters, b.kernel_size, cin));
            cin = b.filters;
        }
        let mut lstm = Vec::new();
        let mut d = 1;
        for &h in &cfg.lstm_units {
            lstm.push(LstmParams::init(rng, h, d));
            d = h;
        }
        let dense = DenseParams::init(rng, cfg.dense_units, chain.merged);
        let output = DenseParams::init(rng, 1, cfg.dense_units);
        Ok(Self {
            conv,
            lstm,
            dense,
            output,
        })
    }

    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (k, c) in self.conv.iter().enumerate() {
            out.push((format!("conv{}.kernels", k + 1), &c.kernels));
            out.push((format!("conv{}.bias", k + 1), &c.bias));
        }
        for (k, l) in self.lstm.iter().enumerate() {
            for (name, t) in lstm_named(l) {
                out.push((format!("lstm{}.{name}", k + 1), t));
            }
        }
        out.push(("dense.weights".into(), &self.dense.weights));
        out.push(("dense.bias".into(), &self.dense.bias));
        out.push(("output.weights".into(), &self.output.weights));
        out.push(("output.bias".into(), &self.output.bias));
        out
    }

    /// Same order as [`named`](Self::named).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
        }
        for l in &mut self.lstm {
            for ((w, u), b) in l.w.iter_mut().zip(l.u.iter_mut()).zip(l.b.iter_mut()) {
                out.push(w);
                out.push(u);
                out.push(b);
            }
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out.push(&mut self.output.weights);
        out.push(&mut self.output.bias);
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            conv: self.conv.iter().map(|c| c.zeros_like()).collect(),
            lstm: self.lstm.iter().map(|l| l.zeros_like()).collect(),
            dense: self.dense.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    /// Elementwise `self += other`; shapes must agree.
    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        let theirs = other.tensors();
        let mine = self.tensors_mut();
        if mine.len() != theirs.len() {
            return Err(Error::Dimension("parameter sets differ in size".into()));
        }
        for (a, b) in mine.into_iter().zip(theirs) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    /// Largest absolute entry over all arrays.
    pub fn max_abs(&self) -> T {
        self.tensors()
            .iter()
            .map(|t| t.max_abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}
