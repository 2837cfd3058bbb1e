use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    out_shape: [usize; 2],
    argmax: Vec<usize>,
}

impl PoolCache {
    /// Flat input index that won each output cell.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Non-overlapping max pooling over time (stride = `pool`). A trailing
/// remainder shorter than `pool` is dropped; ties go to the earliest index.
pub fn maxpool_forward<T: Scalar>(h: &Tensor<T>, pool: usize) -> Result<(Tensor<T>, PoolCache)> {
    if pool < 2 {
        return Err(Error::Parameter(format!("pool extent must be >= 2, got {pool}")));
    }
    if h.rank() != 2 {
        return Err(Error::Shape(format!("pool input must be [L, C], got {:?}", h.shape())));
    }
    let (len, ch) = (h.shape()[0], h.shape()[1]);
    if len < pool {
        return Err(Error::Shape(format!(
            "pool input length {len} is shorter than pool extent {pool}"
        )));
    }
    let out_len = len / pool;
    let xs = h.data();
    let mut out = Vec::with_capacity(out_len * ch);
    let mut argmax = Vec::with_capacity(out_len * ch);
    for t in 0..out_len {
        for c in 0..ch {
            let mut best = (t * pool) * ch + c;
            for s in 1..pool {
                let i = (t * pool + s) * ch + c;
                if xs[i] > xs[best] {
                    best = i;
                }
            }
            out.push(xs[best]);
            argmax.push(best);
        }
    }
    Ok((
        Tensor::produced(&[out_len, ch], out, "maxpool")?,
        PoolCache {
            input_shape: h.shape().to_vec(),
            out_shape: [out_len, ch],
            argmax,
        },
    ))
}

/// Routes each upstream value to the position that won the forward max.
pub fn maxpool_backward<T: Scalar>(cache: PoolCache, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != cache.out_shape {
        return Err(Error::Usage(format!(
            "pool backward expects upstream {:?}, got {:?}",
            cache.out_shape,
            upstream.shape()
        )));
    }
    let mut dx = vec![T::zero(); cache.input_shape.iter().product()];
    for (&i, &g) in cache.argmax.iter().zip(upstream.data()) {
        dx[i] += g;
    }
    Tensor::produced(&cache.input_shape, dx, "maxpool backward")
}
