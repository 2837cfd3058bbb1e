//! The two-branch CNN + LSTM classifier.
//!
//! A flow-feature vector of length `F` is read as an `[F, 1]` sequence and fed
//! to both branches:
//!
//! ```text
//!            ┌─ (conv+ReLU → maxpool) × 3 → flatten ─────── f ─┐
//! x [F, 1] ──┤                                                 ├─ concat(L, f) → dense+ReLU → dropout → dense(1) → σ
//!            └─ LSTM → LSTM (final hidden state) ────────── L ─┘
//! ```

mod config;
mod io;
mod params;

pub use config::{ArchitectureConfig, ConvSpec, ShapeChain};
pub use io::{load_model, load_model_file, model_from_bytes, model_to_bytes, save_model, stored_scalar, ModelFile, FORMAT_VERSION, MAGIC};
pub use params::ModelParams;

use crate::error::{Error, Result};
use crate::layers::{
    concat, concat_backward, conv_block_backward, conv_block_forward, dense_backward,
    dense_forward, dropout_backward, dropout_forward, flatten, lstm_backward_batch,
    lstm_forward_batch, maxpool_backward, maxpool_forward, unflatten, Activation, ConcatCache,
    ConvBlockParams, ConvCache, DenseCache, DenseParams, DropoutCache, FlattenCache,
    LstmBatchCache, Mode, PoolCache,
};
use crate::rng::Rng;
use crate::scalar::{sigmoid, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel<T = f64> {
    config: ArchitectureConfig,
    pub params: ModelParams<T>,
    seed: u64,
}

/// Caches of the CNN branch and the head for one sample.
#[derive(Debug)]
struct SampleCaches<'a, T> {
    cnn: Vec<(ConvCache<'a, T>, PoolCache)>,
    flatten: FlattenCache,
    concat: ConcatCache,
    dense: DenseCache<'a, T>,
    dropout: DropoutCache,
    output: DenseCache<'a, T>,
}

/// Everything a forward pass over a batch produced, in sample order.
#[derive(Debug)]
pub struct BatchForward<'a, T = f64> {
    pub probabilities: Vec<T>,
    pub logits: Vec<T>,
    /// LSTM branch outputs `L`.
    pub lstm_features: Vec<Tensor<T>>,
    /// CNN branch outputs `f`.
    pub cnn_features: Vec<Tensor<T>>,
    samples: Vec<SampleCaches<'a, T>>,
    lstm: Vec<LstmBatchCache<'a, T>>,
    steps: usize,
}

/// Everything one forward pass produced.
#[derive(Debug)]
pub struct ForwardBundle<'a, T = f64> {
    pub probability: T,
    pub logit: T,
    /// LSTM branch output `L`.
    pub lstm_feature: Tensor<T>,
    /// CNN branch output `f`.
    pub cnn_feature: Tensor<T>,
    inner: BatchForward<'a, T>,
}

impl<T: Scalar> HybridModel<T> {
    pub fn build(config: ArchitectureConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, &mut Rng::new(seed))?;
        Ok(Self {
            config,
            params,
            seed,
        })
    }

    /// All-zero parameters; outputs `p = 0.5` for every input.
    pub fn zeroed(config: ArchitectureConfig) -> Result<Self> {
        let params = ModelParams::zeros(&config)?;
        Ok(Self {
            config,
            params,
            seed: 0,
        })
    }

    pub fn from_parts(config: ArchitectureConfig, params: ModelParams<T>, seed: u64) -> Result<Self> {
        let expected = ModelParams::<T>::zeros(&config)?;
        let want: Vec<_> = expected.named().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        let got: Vec<_> = params.named().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        if want != got {
            return Err(Error::Shape(
                "parameter set does not match the architecture".into(),
            ));
        }
        Ok(Self {
            config,
            params,
            seed,
        })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_features(&self) -> usize {
        self.config.input_features
    }

    /// Runs both branches and the head on one feature vector. `rng` is only
    /// consumed by dropout in [`Mode::Train`].
    pub fn forward(&self, x: &[T], mode: Mode, rng: &mut Rng) -> Result<ForwardBundle<'_, T>> {
        let inner = self.forward_batch(&[x], mode, rng)?;
        Ok(ForwardBundle {
            probability: inner.probabilities[0],
            logit: inner.logits[0],
            lstm_feature: inner.lstm_features[0].clone(),
            cnn_feature: inner.cnn_features[0].clone(),
            inner,
        })
    }

    /// Forward pass over several feature vectors. Each sample's outputs are
    /// identical to a lone [`forward`](Self::forward) call, and dropout masks
    /// are drawn sample by sample in order, so the stream is consumed exactly
    /// as by consecutive single-sample calls.
    pub fn forward_batch(&self, xs: &[&[T]], mode: Mode, rng: &mut Rng) -> Result<BatchForward<'_, T>> {
        let f_in = self.config.input_features;
        if xs.is_empty() {
            return Err(Error::Input("forward pass over an empty batch".into()));
        }
        for x in xs {
            if x.len() != f_in {
                return Err(Error::Shape(format!(
                    "model takes {f_in} features, got {}",
                    x.len()
                )));
            }
        }
        let batch = xs.len();

        let packed: Vec<T> = xs.iter().flat_map(|x| x.iter().copied()).collect();
        let mut s = Tensor::new(&[batch, f_in, 1], packed)?;
        let mut lstm = Vec::with_capacity(self.params.lstm.len());
        for layer in &self.params.lstm {
            let out = lstm_forward_batch(&s, layer)?;
            lstm.push(out.cache);
            s = out.sequences;
        }
        let top = s.shape()[2];
        let lstm_features: Vec<Tensor<T>> = (0..batch)
            .map(|b| {
                let end = (b + 1) * f_in * top;
                Tensor::vector(s.data()[end - top..end].to_vec())
            })
            .collect::<Result<_>>()?;

        let mut out = BatchForward {
            probabilities: Vec::with_capacity(batch),
            logits: Vec::with_capacity(batch),
            lstm_features,
            cnn_features: Vec::with_capacity(batch),
            samples: Vec::with_capacity(batch),
            lstm,
            steps: f_in,
        };
        for (b, x) in xs.iter().enumerate() {
            let mut cnn = Vec::with_capacity(self.params.conv.len());
            let mut h = Tensor::matrix(f_in, 1, x.to_vec())?;
            for block in &self.params.conv {
                let (c, cc) = conv_block_forward(&h, block)?;
                let (p, pc) = maxpool_forward(&c, self.config.pool)?;
                cnn.push((cc, pc));
                h = p;
            }
            let (cnn_feature, flatten_cache) = flatten(&h);
            let (merged, concat_cache) = concat(&out.lstm_features[b], &cnn_feature)?;
            let (y, dense_cache) = dense_forward(&merged, &self.params.dense, Activation::Relu)?;
            let (d, dropout_cache) = dropout_forward(&y, self.config.dropout_rate, mode, rng)?;
            let (z, output_cache) = dense_forward(&d, &self.params.output, Activation::None)?;
            let logit = z.data()[0];
            out.logits.push(logit);
            out.probabilities.push(sigmoid(logit));
            out.cnn_features.push(cnn_feature);
            out.samples.push(SampleCaches {
                cnn,
                flatten: flatten_cache,
                concat: concat_cache,
                dense: dense_cache,
                dropout: dropout_cache,
                output: output_cache,
            });
        }
        Ok(out)
    }

    pub fn probability(&self, x: &[T]) -> Result<T> {
        // inference never touches the stream
        let mut rng = Rng::new(0);
        Ok(self.forward(x, Mode::Infer, &mut rng)?.probability)
    }

    /// Inference-mode probabilities for many rows, evaluated in batches.
    pub fn probabilities(&self, xs: &[Vec<T>]) -> Result<Vec<T>> {
        let mut rng = Rng::new(0);
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(INFERENCE_BATCH) {
            let refs: Vec<&[T]> = chunk.iter().map(|x| x.as_slice()).collect();
            out.extend(self.forward_batch(&refs, Mode::Infer, &mut rng)?.probabilities);
        }
        Ok(out)
    }

    /// `1` (attack) iff `p >= threshold`.
    pub fn predict(&self, x: &[T], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.probability(x)?.as_f64() >= threshold))
    }
}

/// Rows per batch when scoring tables.
const INFERENCE_BATCH: usize = 64;

impl<T: Scalar> ForwardBundle<'_, T> {
    /// Gradients of every parameter given `d loss / d logit`.
    pub fn backward(self, dlogit: T) -> Result<ModelParams<T>> {
        self.inner.backward(&[dlogit])
    }
}

impl<T: Scalar> BatchForward<'_, T> {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Parameter gradients summed over the batch, given `d loss / d logit`
    /// per sample.
    pub fn backward(self, dlogits: &[T]) -> Result<ModelParams<T>> {
        let batch = self.len();
        if dlogits.len() != batch {
            return Err(Error::Usage(format!(
                "backward got {} logit gradients for a batch of {batch}",
                dlogits.len()
            )));
        }
        let steps = self.steps;
        let top = self.lstm_features[0].len();
        let mut upstream = vec![T::zero(); batch * steps * top];
        let mut g_conv: Option<Vec<ConvBlockParams<T>>> = None;
        let mut g_dense: Option<DenseParams<T>> = None;
        let mut g_output: Option<DenseParams<T>> = None;

        for (b, (c, &dlogit)) in self.samples.into_iter().zip(dlogits).enumerate() {
            let dz = Tensor::vector(vec![dlogit])?;
            let (dd, go) = dense_backward(c.output, &dz)?;
            let dy = dropout_backward(c.dropout, &dd)?;
            let (dmerged, gd) = dense_backward(c.dense, &dy)?;
            let (dl, df) = concat_backward(c.concat, &dmerged)?;
            let end = (b + 1) * steps * top;
            upstream[end - top..end].copy_from_slice(dl.data());

            let mut gc = Vec::with_capacity(c.cnn.len());
            let mut dh = unflatten(c.flatten, &df)?;
            for (cc, pc) in c.cnn.into_iter().rev() {
                let dc = maxpool_backward(pc, &dh)?;
                let (dx, g) = conv_block_backward(cc, &dc)?;
                gc.push(g);
                dh = dx;
            }
            gc.reverse();

            match (&mut g_conv, &mut g_dense, &mut g_output) {
                (Some(ac), Some(ad), Some(ao)) => {
                    for (a, g) in ac.iter_mut().zip(&gc) {
                        a.kernels.add_assign(&g.kernels)?;
                        a.bias.add_assign(&g.bias)?;
                    }
                    ad.weights.add_assign(&gd.weights)?;
                    ad.bias.add_assign(&gd.bias)?;
                    ao.weights.add_assign(&go.weights)?;
                    ao.bias.add_assign(&go.bias)?;
                }
                _ => {
                    g_conv = Some(gc);
                    g_dense = Some(gd);
                    g_output = Some(go);
                }
            }
        }

        let mut ds = Tensor::new(&[batch, steps, top], upstream)?;
        let mut g_lstm = Vec::with_capacity(self.lstm.len());
        for cache in self.lstm.into_iter().rev() {
            let (dx, g) = lstm_backward_batch(cache, &ds)?;
            g_lstm.push(g);
            ds = dx;
        }
        g_lstm.reverse();

        Ok(ModelParams {
            conv: g_conv.expect("non-empty batch"),
            lstm: g_lstm,
            dense: g_dense.expect("non-empty batch"),
            output: g_output.expect("non-empty batch"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ArchitectureConfig {
        ArchitectureConfig::new(22)
            .with_conv(2, 2)
            .with_lstm_units(vec![2, 3])
            .with_dense_units(4)
    }

    #[test]
    fn zero_model_is_undecided() {
        let m = HybridModel::<f64>::zeroed(ArchitectureConfig::new(60)).unwrap();
        let mut rng = Rng::new(3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..60).map(|_| rng.uniform()).collect();
            let b = m.forward(&x, Mode::Train, &mut rng).unwrap();
            assert_eq!(b.probability, 0.5);
            assert_eq!(b.logit, 0.0);
            assert!(b.lstm_feature.data().iter().all(|&v| v == 0.0));
            assert!(b.cnn_feature.data().iter().all(|&v| v == 0.0));
            assert_eq!(m.predict(&x, 0.5).unwrap(), 1);
            assert_eq!(m.predict(&x, 1.0).unwrap(), 0);
        }
    }

    #[test]
    fn branch_sizes_for_default_config() {
        let m = HybridModel::<f64>::build(ArchitectureConfig::new(100), 1).unwrap();
        let x = vec![0.5; 100];
        let b = m.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
        assert_eq!(b.cnn_feature.len(), 640);
        assert_eq!(b.lstm_feature.len(), 128);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = HybridModel::<f64>::build(tiny(), 9).unwrap();
        let b = HybridModel::<f64>::build(tiny(), 9).unwrap();
        let c = HybridModel::<f64>::build(tiny(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn inference_is_deterministic() {
        let m = HybridModel::<f64>::build(tiny(), 2).unwrap();
        let x: Vec<f64> = (0..22).map(|i| i as f64 / 22.0).collect();
        let p1 = m.forward(&x, Mode::Infer, &mut Rng::new(1)).unwrap().probability;
        let p2 = m.forward(&x, Mode::Infer, &mut Rng::new(2)).unwrap().probability;
        assert_eq!(p1, p2);
        assert!(p1 > 0.0 && p1 < 1.0);
    }

    #[test]
    fn wrong_feature_count() {
        let m = HybridModel::<f64>::build(tiny(), 2).unwrap();
        assert!(matches!(m.probability(&[0.0; 5]), Err(Error::Shape(_))));
    }

    #[test]
    fn branches_are_independent() {
        let base = HybridModel::<f64>::build(tiny(), 4).unwrap();
        let x: Vec<f64> = (0..22).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let b0 = base.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();

        let mut cnn_only = base.clone();
        for c in &mut cnn_only.params.conv {
            for t in [&mut c.kernels, &mut c.bias] {
                for v in t.data_mut() {
                    *v += 0.3;
                }
            }
        }
        let b1 = cnn_only.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
        assert_eq!(b1.lstm_feature, b0.lstm_feature);
        assert_ne!(b1.cnn_feature, b0.cnn_feature);

        let mut lstm_only = base.clone();
        for l in &mut lstm_only.params.lstm {
            for v in l.b[0].data_mut() {
                *v -= 0.7;
            }
        }
        let b2 = lstm_only.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
        assert_eq!(b2.cnn_feature, b0.cnn_feature);
        assert_ne!(b2.lstm_feature, b0.lstm_feature);
    }

    #[test]
    fn f32_model_runs() {
        let m = HybridModel::<f32>::build(tiny(), 2).unwrap();
        let p = m.probability(&[0.25f32; 22]).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn batch_matches_single_samples() {
        let m = HybridModel::<f64>::build(tiny(), 6).unwrap();
        let mut rng = Rng::new(8);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..22).map(|_| rng.uniform()).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let dl: Vec<f64> = (0..5).map(|i| 0.1 * i as f64 - 0.2).collect();

        let batch = m.forward_batch(&refs, Mode::Train, &mut Rng::new(77)).unwrap();
        let probs = batch.probabilities.clone();
        let g_batch = batch.backward(&dl).unwrap();

        let mut stream = Rng::new(77);
        let mut g_sum = m.params.zeros_like();
        for (i, x) in xs.iter().enumerate() {
            let b = m.forward(x, Mode::Train, &mut stream).unwrap();
            assert_eq!(b.probability, probs[i]);
            g_sum.accumulate(&b.backward(dl[i]).unwrap()).unwrap();
        }
        for (a, b) in g_batch.tensors().iter().zip(g_sum.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
        assert_eq!(m.probabilities(&xs).unwrap().len(), 5);
    }

    #[test]
    fn backward_checks_gradient_count() {
        let m = HybridModel::<f64>::build(tiny(), 6).unwrap();
        let x = vec![0.5; 22];
        let b = m.forward_batch(&[&x, &x], Mode::Infer, &mut Rng::new(0)).unwrap();
        assert!(matches!(b.backward(&[1.0]), Err(Error::Usage(_))));
        assert!(matches!(m.forward_batch(&[], Mode::Infer, &mut Rng::new(0)), Err(Error::Input(_))));
    }
}
