//! Forward and backward passes for every layer kind of the hybrid network.
//!
//! Each forward returns its output together with a cache. The matching
//! backward consumes the cache by value, so a cache can back exactly one
//! backward pass:
//!
//! ```compile_fail
//! use gridsentry::layers::{maxpool_forward, maxpool_backward};
//! use gridsentry::Tensor;
//! let h = Tensor::<f64>::matrix(4, 1, vec![1.0, 3.0, 2.0, 5.0]).unwrap();
//! let (out, cache) = maxpool_forward(&h, 2).unwrap();
//! let _ = maxpool_backward(cache, &out);
//! let _ = maxpool_backward(cache, &out); // cache already consumed
//! ```

mod conv;
mod dense;
mod dropout;
mod init;
mod lstm;
mod lstm_batch;
mod pool;
mod reshape;

pub use conv::{conv_block_backward, conv_block_forward, ConvBlockParams, ConvCache};
pub use dense::{dense_backward, dense_forward, Activation, DenseCache, DenseParams};
pub use dropout::{dropout_backward, dropout_forward, dropout_with_mask, DropoutCache, Mode};
pub use init::glorot_uniform;
pub use lstm::{lstm_backward, lstm_forward, Gate, LstmCache, LstmOutput, LstmParams};
pub use lstm_batch::{lstm_backward_batch, lstm_forward_batch, LstmBatchCache, LstmBatchOutput};
pub use pool::{maxpool_backward, maxpool_forward, PoolCache};
pub use reshape::{concat, concat_backward, flatten, unflatten, ConcatCache, FlattenCache};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Gradients of a layer's trainable arrays, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ParamGrads<T = f64> {
    None,
    Conv(ConvBlockParams<T>),
    Lstm(LstmParams<T>),
    Dense(DenseParams<T>),
}

impl<T: Scalar> ParamGrads<T> {
    /// `(name, gradient)` pairs in canonical order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            ParamGrads::None => Vec::new(),
            ParamGrads::Conv(p) => vec![("kernels".into(), &p.kernels), ("bias".into(), &p.bias)],
            ParamGrads::Dense(p) => vec![("weights".into(), &p.weights), ("bias".into(), &p.bias)],
            ParamGrads::Lstm(p) => lstm_named(p),
        }
    }
}

/// `w_i, u_i, b_i, w_f, ... , b_c`.
pub(crate) fn lstm_named<T: Scalar>(p: &LstmParams<T>) -> Vec<(String, &Tensor<T>)> {
    let mut out = Vec::with_capacity(12);
    for g in Gate::ALL {
        let i = g as usize;
        out.push((format!("w_{}", g.suffix()), &p.w[i]));
        out.push((format!("u_{}", g.suffix()), &p.u[i]));
        out.push((format!("b_{}", g.suffix()), &p.b[i]));
    }
    out
}

/// Result of a backward pass: one gradient per forward input (two for
/// concat) plus the parameter gradients.
#[derive(Clone, Debug)]
pub struct LayerGrad<T = f64> {
    pub inputs: Vec<Tensor<T>>,
    pub params: ParamGrads<T>,
}

/// Type-erased cache for callers that treat layers uniformly.
#[derive(Debug)]
pub enum LayerCache<'a, T> {
    Conv(ConvCache<'a, T>),
    Pool(PoolCache),
    Flatten(FlattenCache),
    Lstm(LstmCache<'a, T>),
    Concat(ConcatCache),
    Dense(DenseCache<'a, T>),
    Dropout(DropoutCache),
}

impl<'a, T: Scalar> LayerCache<'a, T> {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerCache::Conv(_) => "conv",
            LayerCache::Pool(_) => "maxpool",
            LayerCache::Flatten(_) => "flatten",
            LayerCache::Lstm(_) => "lstm",
            LayerCache::Concat(_) => "concat",
            LayerCache::Dense(_) => "dense",
            LayerCache::Dropout(_) => "dropout",
        }
    }

    pub fn backward(self, upstream: &Tensor<T>) -> Result<LayerGrad<T>> {
        let single = |t: Tensor<T>| vec![t];
        Ok(match self {
            LayerCache::Conv(c) => {
                let (dx, g) = conv_block_backward(c, upstream)?;
                LayerGrad {
                    inputs: single(dx),
                    params: ParamGrads::Conv(g),
                }
            }
            LayerCache::Pool(c) => LayerGrad {
                inputs: single(maxpool_backward(c, upstream)?),
                params: ParamGrads::None,
            },
            LayerCache::Flatten(c) => LayerGrad {
                inputs: single(unflatten(c, upstream)?),
                params: ParamGrads::None,
            },
            LayerCache::Lstm(c) => {
                let (dx, g) = lstm_backward(c, upstream)?;
                LayerGrad {
                    inputs: single(dx),
                    params: ParamGrads::Lstm(g),
                }
            }
            LayerCache::Concat(c) => {
                let (l, r) = concat_backward(c, upstream)?;
                LayerGrad {
                    inputs: vec![l, r],
                    params: ParamGrads::None,
                }
            }
            LayerCache::Dense(c) => {
                let (dx, g) = dense_backward(c, upstream)?;
                LayerGrad {
                    inputs: single(dx),
                    params: ParamGrads::Dense(g),
                }
            }
            LayerCache::Dropout(c) => LayerGrad {
                inputs: single(dropout_backward(c, upstream)?),
                params: ParamGrads::None,
            },
        })
    }
}

impl<'a, T> From<ConvCache<'a, T>> for LayerCache<'a, T> {
    fn from(c: ConvCache<'a, T>) -> Self {
        LayerCache::Conv(c)
    }
}
impl<T> From<PoolCache> for LayerCache<'_, T> {
    fn from(c: PoolCache) -> Self {
        LayerCache::Pool(c)
    }
}
impl<T> From<FlattenCache> for LayerCache<'_, T> {
    fn from(c: FlattenCache) -> Self {
        LayerCache::Flatten(c)
    }
}
impl<'a, T> From<LstmCache<'a, T>> for LayerCache<'a, T> {
    fn from(c: LstmCache<'a, T>) -> Self {
        LayerCache::Lstm(c)
    }
}
impl<T> From<ConcatCache> for LayerCache<'_, T> {
    fn from(c: ConcatCache) -> Self {
        LayerCache::Concat(c)
    }
}
impl<'a, T> From<DenseCache<'a, T>> for LayerCache<'a, T> {
    fn from(c: DenseCache<'a, T>) -> Self {
        LayerCache::Dense(c)
    }
}
impl<T> From<DropoutCache> for LayerCache<'_, T> {
    fn from(c: DropoutCache) -> Self {
        LayerCache::Dropout(c)
    }
}
