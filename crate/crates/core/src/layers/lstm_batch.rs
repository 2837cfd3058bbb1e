//! The LSTM layer applied to a batch of equal-length sequences at once.
//!
//! Same equations as [`lstm_forward`](super::lstm_forward) with zero initial
//! state, but the input projection, the recurrent products and the parameter
//! gradients are formed as matrix products over the whole batch. Each sample's
//! result is independent of the batch it travels in.

use crate::error::{Error, Result};
use crate::kernels::{gemm_acc, gemm_tn_acc, transpose};
use crate::layers::LstmParams;
use crate::scalar::{sigmoid, tanh, Scalar};
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct LstmBatchCache<'a, T> {
    params: &'a LstmParams<T>,
    batch: usize,
    steps: usize,
    input: Vec<T>,
    /// `[B·T, 4H]`, gate blocks in `i, f, o, c` order.
    gates: Vec<T>,
    cell: Vec<T>,
    cell_tanh: Vec<T>,
    hidden: Vec<T>,
}

#[derive(Debug)]
pub struct LstmBatchOutput<'a, T> {
    /// Every hidden state, `[B, T, H]`.
    pub sequences: Tensor<T>,
    pub cache: LstmBatchCache<'a, T>,
}

fn stacked<T: Scalar>(parts: &[Tensor<T>; 4]) -> Vec<T> {
    parts.iter().flat_map(|t| t.data().iter().copied()).collect()
}

/// Runs the layer over `x` shaped `[B, T, D]`.
pub fn lstm_forward_batch<'a, T: Scalar>(
    x: &Tensor<T>,
    p: &'a LstmParams<T>,
) -> Result<LstmBatchOutput<'a, T>> {
    let (hs, ds) = (p.hidden_size(), p.input_size());
    if x.rank() != 3 || x.shape()[2] != ds || x.shape()[0] == 0 || x.shape()[1] == 0 {
        return Err(Error::Shape(format!(
            "batched LSTM input must be [B >= 1, T >= 1, {ds}], got {:?}",
            x.shape()
        )));
    }
    let (batch, steps) = (x.shape()[0], x.shape()[1]);
    let g4 = 4 * hs;
    let rows = batch * steps;

    let wt = transpose(&stacked(&p.w), g4, ds);
    let ut = transpose(&stacked(&p.u), g4, hs);
    let bias = stacked(&p.b);

    let mut pre = Vec::with_capacity(rows * g4);
    for _ in 0..rows {
        pre.extend_from_slice(&bias);
    }
    gemm_acc(x.data(), &wt, &mut pre, rows, ds, g4);

    let mut gates = vec![T::zero(); rows * g4];
    let mut cell = vec![T::zero(); rows * hs];
    let mut cell_tanh = vec![T::zero(); rows * hs];
    let mut hidden = vec![T::zero(); rows * hs];
    let mut h_state = vec![T::zero(); batch * hs];
    let mut c_state = vec![T::zero(); batch * hs];
    let mut z = vec![T::zero(); batch * g4];

    for t in 0..steps {
        for s in 0..batch {
            let row = s * steps + t;
            z[s * g4..(s + 1) * g4].copy_from_slice(&pre[row * g4..(row + 1) * g4]);
        }
        if t > 0 {
            gemm_acc(&h_state, &ut, &mut z, batch, hs, g4);
        }
        for s in 0..batch {
            let row = s * steps + t;
            let zs = &z[s * g4..(s + 1) * g4];
            let gs = &mut gates[row * g4..(row + 1) * g4];
            for j in 0..hs {
                let i = sigmoid(zs[j]);
                let f = sigmoid(zs[hs + j]);
                let o = sigmoid(zs[2 * hs + j]);
                let g = tanh(zs[3 * hs + j]);
                gs[j] = i;
                gs[hs + j] = f;
                gs[2 * hs + j] = o;
                gs[3 * hs + j] = g;
                let c = f * c_state[s * hs + j] + i * g;
                let tc = tanh(c);
                let h = o * tc;
                c_state[s * hs + j] = c;
                h_state[s * hs + j] = h;
                cell[row * hs + j] = c;
                cell_tanh[row * hs + j] = tc;
                hidden[row * hs + j] = h;
            }
        }
    }

    let sequences = Tensor::produced(&[batch, steps, hs], hidden.clone(), "LSTM")?;
    Ok(LstmBatchOutput {
        sequences,
        cache: LstmBatchCache {
            params: p,
            batch,
            steps,
            input: x.data().to_vec(),
            gates,
            cell,
            cell_tanh,
            hidden,
        },
    })
}

/// Backpropagation through time for the whole batch. `upstream` is the
/// gradient with respect to every hidden state, `[B, T, H]`. Returns the input
/// gradient `[B, T, D]` and the parameter gradients summed over the batch.
pub fn lstm_backward_batch<T: Scalar>(
    cache: LstmBatchCache<'_, T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, LstmParams<T>)> {
    let p = cache.params;
    let (hs, ds) = (p.hidden_size(), p.input_size());
    let (batch, steps) = (cache.batch, cache.steps);
    if upstream.shape() != [batch, steps, hs] {
        return Err(Error::Usage(format!(
            "batched LSTM backward expects upstream [{batch}, {steps}, {hs}], got {:?}",
            upstream.shape()
        )));
    }
    let g4 = 4 * hs;
    let rows = batch * steps;
    let up = upstream.data();
    let one = T::one();
    let u_all = stacked(&p.u);

    let mut dpre = vec![T::zero(); rows * g4];
    let mut dpre_t = vec![T::zero(); batch * g4];
    let mut dh_next = vec![T::zero(); batch * hs];
    let mut dc_next = vec![T::zero(); batch * hs];

    for t in (0..steps).rev() {
        for s in 0..batch {
            let row = s * steps + t;
            let gs = &cache.gates[row * g4..(row + 1) * g4];
            let d = &mut dpre_t[s * g4..(s + 1) * g4];
            for j in 0..hs {
                let (i, f, o, g) = (gs[j], gs[hs + j], gs[2 * hs + j], gs[3 * hs + j]);
                let tc = cache.cell_tanh[row * hs + j];
                let c_prev = if t == 0 { T::zero() } else { cache.cell[(row - 1) * hs + j] };
                let dh = up[row * hs + j] + dh_next[s * hs + j];
                let dc = dc_next[s * hs + j] + dh * o * (one - tc * tc);
                dc_next[s * hs + j] = dc * f;
                d[j] = dc * g * i * (one - i);
                d[hs + j] = dc * c_prev * f * (one - f);
                d[2 * hs + j] = dh * tc * o * (one - o);
                d[3 * hs + j] = dc * i * (one - g * g);
            }
            dpre[row * g4..(row + 1) * g4].copy_from_slice(d);
        }
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        gemm_acc(&dpre_t, &u_all, &mut dh_next, batch, g4, hs);
    }

    let mut dx = vec![T::zero(); rows * ds];
    gemm_acc(&dpre, &stacked(&p.w), &mut dx, rows, g4, ds);

    let mut h_prev = vec![T::zero(); rows * hs];
    for s in 0..batch {
        for t in 1..steps {
            let row = s * steps + t;
            h_prev[row * hs..(row + 1) * hs].copy_from_slice(&cache.hidden[(row - 1) * hs..row * hs]);
        }
    }
    let mut du = vec![T::zero(); g4 * hs];
    gemm_tn_acc(&dpre, &h_prev, &mut du, g4, rows, hs);
    let mut dw = vec![T::zero(); g4 * ds];
    gemm_tn_acc(&dpre, &cache.input, &mut dw, g4, rows, ds);
    let mut db = vec![T::zero(); g4];
    for row in dpre.chunks_exact(g4) {
        for (acc, &v) in db.iter_mut().zip(row) {
            *acc += v;
        }
    }

    let split = |v: &[T], per: usize, shape: &[usize]| -> Result<[Tensor<T>; 4]> {
        let parts: Vec<Tensor<T>> = v
            .chunks_exact(per)
            .map(|c| Tensor::produced(shape, c.to_vec(), "LSTM backward"))
            .collect::<Result<_>>()?;
        Ok(parts.try_into().expect("four gate blocks"))
    };
    let grads = LstmParams {
        w: split(&dw, hs * ds, &[hs, ds])?,
        u: split(&du, hs * hs, &[hs, hs])?,
        b: split(&db, hs, &[hs])?,
    };
    Ok((Tensor::produced(&[batch, steps, ds], dx, "LSTM backward")?, grads))
}
