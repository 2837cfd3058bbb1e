use crate::error::{Error, Result};
use crate::layers::init::glorot_uniform;
use crate::rng::Rng;
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

/// Filters and bias of one 1-D convolution block.
///
/// `kernels` is `[filters, kernel_size, in_channels]`, `bias` is `[filters]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlockParams<T = f64> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvBlockParams<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if kernels.rank() != 3 || kernels.shape().contains(&0) {
            return Err(Error::Shape(format!(
                "conv kernels must be [filters, kernel, in_channels] with positive extents, got {:?}",
                kernels.shape()
            )));
        }
        if bias.shape() != [kernels.shape()[0]] {
            return Err(Error::Shape(format!(
                "conv bias {:?} does not match {} filters",
                bias.shape(),
                kernels.shape()[0]
            )));
        }
        Ok(Self { kernels, bias })
    }

    pub fn zeros(filters: usize, kernel_size: usize, in_channels: usize) -> Self {
        Self {
            kernels: Tensor::zeros(&[filters, kernel_size, in_channels]),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn init(rng: &mut Rng, filters: usize, kernel_size: usize, in_channels: usize) -> Self {
        Self {
            kernels: glorot_uniform(
                rng,
                &[filters, kernel_size, in_channels],
                kernel_size * in_channels,
                kernel_size * filters,
            ),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.filters(), self.kernel_size(), self.in_channels())
    }
}

#[derive(Debug)]
pub struct ConvCache<'a, T> {
    params: &'a ConvBlockParams<T>,
    input: Tensor<T>,
    pre: Vec<T>,
    out_len: usize,
}

/// Valid, stride-1 cross-correlation followed by ReLU.
///
/// `x` is `[L, in_channels]`; the output is `[L - K + 1, filters]`.
pub fn conv_block_forward<'a, T: Scalar>(
    x: &Tensor<T>,
    p: &'a ConvBlockParams<T>,
) -> Result<(Tensor<T>, ConvCache<'a, T>)> {
    let (k, cin, cout) = (p.kernel_size(), p.in_channels(), p.filters());
    if x.rank() != 2 || x.shape()[1] != cin {
        return Err(Error::Shape(format!(
            "conv input must be [L, {cin}], got {:?}",
            x.shape()
        )));
    }
    let len = x.shape()[0];
    if len < k {
        return Err(Error::Shape(format!(
            "conv input length {len} is shorter than kernel {k}"
        )));
    }
    let out_len = len - k + 1;
    let window = k * cin;
    let xs = x.data();
    let ks = p.kernels.data();
    let bs = p.bias.data();
    let mut pre = vec![T::zero(); out_len * cout];
    for t in 0..out_len {
        let win = &xs[t * cin..t * cin + window];
        for c in 0..cout {
            pre[t * cout + c] = bs[c] + dot(&ks[c * window..(c + 1) * window], win);
        }
    }
    let out = pre.iter().map(|&v| crate::scalar::relu(v)).collect();
    let out = Tensor::produced(&[out_len, cout], out, "conv block")?;
    Ok((
        out,
        ConvCache {
            params: p,
            input: x.clone(),
            pre,
            out_len,
        },
    ))
}

/// Returns the input gradient and the parameter gradients.
pub fn conv_block_backward<T: Scalar>(
    cache: ConvCache<'_, T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, ConvBlockParams<T>)> {
    let p = cache.params;
    let (k, cin, cout) = (p.kernel_size(), p.in_channels(), p.filters());
    if upstream.shape() != [cache.out_len, cout] {
        return Err(Error::Usage(format!(
            "conv backward expects upstream [{}, {cout}], got {:?}",
            cache.out_len,
            upstream.shape()
        )));
    }
    let window = k * cin;
    let xs = cache.input.data();
    let ks = p.kernels.data();
    let g = upstream.data();
    let mut dx = vec![T::zero(); xs.len()];
    let mut dk = vec![T::zero(); ks.len()];
    let mut db = vec![T::zero(); cout];
    for t in 0..cache.out_len {
        let win = t * cin..t * cin + window;
        for c in 0..cout {
            let i = t * cout + c;
            if cache.pre[i] <= T::zero() {
                continue;
            }
            let gi = g[i];
            db[c] += gi;
            axpy(gi, &xs[win.clone()], &mut dk[c * window..(c + 1) * window]);
            axpy(gi, &ks[c * window..(c + 1) * window], &mut dx[win.clone()]);
        }
    }
    let dx = Tensor::produced(cache.input.shape(), dx, "conv backward")?;
    let grads = ConvBlockParams {
        kernels: Tensor::produced(p.kernels.shape(), dk, "conv backward")?,
        bias: Tensor::produced(&[cout], db, "conv backward")?,
    };
    Ok((dx, grads))
}
