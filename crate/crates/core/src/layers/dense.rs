use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::init::glorot_uniform;
use crate::rng::Rng;
use crate::scalar::{axpy, dot, relu, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// Fully connected layer: `weights` is `[U, V]`, `bias` is `[U]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T = f64> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weights.rank() != 2 || bias.shape() != [weights.shape()[0]] {
            return Err(Error::Shape(format!(
                "dense weights {:?} and bias {:?} are inconsistent",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(units: usize, inputs: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[units, inputs]),
            bias: Tensor::zeros(&[units]),
        }
    }

    pub fn init(rng: &mut Rng, units: usize, inputs: usize) -> Self {
        Self {
            weights: glorot_uniform(rng, &[units, inputs], inputs, units),
            bias: Tensor::zeros(&[units]),
        }
    }

    pub fn units(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.units(), self.inputs())
    }
}

#[derive(Debug)]
pub struct DenseCache<'a, T> {
    params: &'a DenseParams<T>,
    input: Tensor<T>,
    pre: Vec<T>,
    activation: Activation,
}

/// `activation(weights · c + bias)`.
pub fn dense_forward<'a, T: Scalar>(
    c: &Tensor<T>,
    p: &'a DenseParams<T>,
    activation: Activation,
) -> Result<(Tensor<T>, DenseCache<'a, T>)> {
    let (u, v) = (p.units(), p.inputs());
    if c.shape() != [v] {
        return Err(Error::Dimension(format!(
            "dense layer takes [{v}], got {:?}",
            c.shape()
        )));
    }
    let w = p.weights.data();
    let b = p.bias.data();
    let pre: Vec<T> = (0..u)
        .map(|i| b[i] + dot(&w[i * v..(i + 1) * v], c.data()))
        .collect();
    let out = match activation {
        Activation::Relu => pre.iter().map(|&z| relu(z)).collect(),
        Activation::None => pre.clone(),
    };
    Ok((
        Tensor::produced(&[u], out, "dense")?,
        DenseCache {
            params: p,
            input: c.clone(),
            pre,
            activation,
        },
    ))
}

pub fn dense_backward<T: Scalar>(
    cache: DenseCache<'_, T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, DenseParams<T>)> {
    let p = cache.params;
    let (u, v) = (p.units(), p.inputs());
    if upstream.shape() != [u] {
        return Err(Error::Usage(format!(
            "dense backward expects upstream [{u}], got {:?}",
            upstream.shape()
        )));
    }
    let w = p.weights.data();
    let x = cache.input.data();
    let mut dx = vec![T::zero(); v];
    let mut dw = vec![T::zero(); u * v];
    let mut db = vec![T::zero(); u];
    for i in 0..u {
        let mut g = upstream.data()[i];
        if cache.activation == Activation::Relu && cache.pre[i] <= T::zero() {
            g = T::zero();
        }
        if g == T::zero() {
            continue;
        }
        db[i] = g;
        axpy(g, x, &mut dw[i * v..(i + 1) * v]);
        axpy(g, &w[i * v..(i + 1) * v], &mut dx);
    }
    Ok((
        Tensor::produced(&[v], dx, "dense backward")?,
        DenseParams {
            weights: Tensor::produced(&[u, v], dw, "dense backward")?,
            bias: Tensor::produced(&[u], db, "dense backward")?,
        },
    ))
}
