//! Single LSTM layer over a whole sequence, with backpropagation through time.
//!
//! Per step, with `⊙` the elementwise product:
//!
//! ```text
//! i_t = σ(w_i x_t + u_i h_{t-1} + b_i)
//! f_t = σ(w_f x_t + u_f h_{t-1} + b_f)
//! o_t = σ(w_o x_t + u_o h_{t-1} + b_o)
//! g_t = tanh(w_c x_t + u_c h_{t-1} + b_c)      (candidate cell state)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
//! h_t = o_t ⊙ tanh(c_t)
//! ```

use crate::error::{Error, Result};
use crate::layers::init::glorot_uniform;
use crate::rng::Rng;
use crate::scalar::{axpy, dot, sigmoid, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Cell => "c",
        }
    }
}

/// Per-gate input weights `w` (`[H, D]`), recurrent weights `u` (`[H, H]`)
/// and biases `b` (`[H]`), indexed by [`Gate`].
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T = f64> {
    pub w: [Tensor<T>; 4],
    pub u: [Tensor<T>; 4],
    pub b: [Tensor<T>; 4],
}

impl<T: Scalar> LstmParams<T> {
    pub fn new(w: [Tensor<T>; 4], u: [Tensor<T>; 4], b: [Tensor<T>; 4]) -> Result<Self> {
        let h = b[0].len();
        let d = if w[0].rank() == 2 { w[0].shape()[1] } else { 0 };
        if h == 0 || d == 0 {
            return Err(Error::Shape("LSTM needs positive hidden and input sizes".into()));
        }
        for g in 0..4 {
            if w[g].shape() != [h, d] || u[g].shape() != [h, h] || b[g].shape() != [h] {
                return Err(Error::Shape(format!(
                    "LSTM gate {} arrays {:?}/{:?}/{:?} inconsistent with H={h}, D={d}",
                    Gate::ALL[g].suffix(),
                    w[g].shape(),
                    u[g].shape(),
                    b[g].shape()
                )));
            }
        }
        Ok(Self { w, u, b })
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| Tensor::zeros(&[hidden, input])),
            u: std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    /// Glorot-uniform weights, zero biases. Draw order: for each gate
    /// `i, f, o, c`, first `w` then `u`.
    pub fn init(rng: &mut Rng, hidden: usize, input: usize) -> Self {
        let mut w = Vec::with_capacity(4);
        let mut u = Vec::with_capacity(4);
        for _ in Gate::ALL {
            w.push(glorot_uniform(rng, &[hidden, input], input, hidden));
            u.push(glorot_uniform(rng, &[hidden, hidden], hidden, hidden));
        }
        Self {
            w: w.try_into().expect("four gates"),
            u: u.try_into().expect("four gates"),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b[0].len()
    }

    pub fn input_size(&self) -> usize {
        self.w[0].shape()[1]
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_size(), self.input_size())
    }
}

#[derive(Debug)]
pub struct LstmCache<'a, T> {
    params: &'a LstmParams<T>,
    input: Tensor<T>,
    h0: Vec<T>,
    c0: Vec<T>,
    /// Gate activations `[4][T * H]`, in [`Gate`] order.
    gates: [Vec<T>; 4],
    cell: Vec<T>,
    cell_tanh: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Scalar> LstmCache<'_, T> {
    /// Activation of `gate` at step `t` (0-based).
    pub fn gate(&self, gate: Gate, t: usize) -> &[T] {
        let h = self.h0.len();
        &self.gates[gate as usize][t * h..(t + 1) * h]
    }

    pub fn cell_state(&self, t: usize) -> &[T] {
        let h = self.h0.len();
        &self.cell[t * h..(t + 1) * h]
    }

    pub fn steps(&self) -> usize {
        self.input.shape()[0]
    }
}

/// Output of [`lstm_forward`].
#[derive(Debug)]
pub struct LstmOutput<'a, T> {
    /// Final hidden state `h_T`.
    pub last: Tensor<T>,
    /// Every hidden state, `[T, H]`.
    pub sequence: Tensor<T>,
    pub cache: LstmCache<'a, T>,
}

/// Runs the layer over `x` (`[T, D]`). Initial states default to zero.
#[allow(clippy::needless_range_loop)]
pub fn lstm_forward<'a, T: Scalar>(
    x: &Tensor<T>,
    p: &'a LstmParams<T>,
    h0: Option<&Tensor<T>>,
    c0: Option<&Tensor<T>>,
) -> Result<LstmOutput<'a, T>> {
    let (hs, ds) = (p.hidden_size(), p.input_size());
    if x.rank() != 2 || x.shape()[1] != ds || x.shape()[0] == 0 {
        return Err(Error::Shape(format!(
            "LSTM input must be [T >= 1, {ds}], got {:?}",
            x.shape()
        )));
    }
    let state = |s: Option<&Tensor<T>>, what: &str| -> Result<Vec<T>> {
        match s {
            None => Ok(vec![T::zero(); hs]),
            Some(t) if t.shape() == [hs] => Ok(t.data().to_vec()),
            Some(t) => Err(Error::Shape(format!(
                "LSTM {what} must be [{hs}], got {:?}",
                t.shape()
            ))),
        }
    };
    let h0 = state(h0, "h0")?;
    let c0 = state(c0, "c0")?;
    let steps = x.shape()[0];
    let n = steps * hs;
    let mut gates: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); n]);
    let mut cell = vec![T::zero(); n];
    let mut cell_tanh = vec![T::zero(); n];
    let mut hidden = vec![T::zero(); n];

    let xs = x.data();
    for t in 0..steps {
        let xt = &xs[t * ds..(t + 1) * ds];
        let h_prev: &[T] = if t == 0 { &h0 } else { &hidden[(t - 1) * hs..t * hs] };
        for g in Gate::ALL {
            let gi = g as usize;
            let (w, u, b) = (p.w[gi].data(), p.u[gi].data(), p.b[gi].data());
            let out = &mut gates[gi][t * hs..(t + 1) * hs];
            for j in 0..hs {
                let z = b[j] + dot(&w[j * ds..(j + 1) * ds], xt) + dot(&u[j * hs..(j + 1) * hs], h_prev);
                out[j] = if g == Gate::Cell { z.tanh() } else { sigmoid(z) };
            }
        }
        for j in 0..hs {
            let k = t * hs + j;
            let c_prev = if t == 0 { c0[j] } else { cell[k - hs] };
            let c = gates[1][k] * c_prev + gates[0][k] * gates[3][k];
            let tc = c.tanh();
            cell[k] = c;
            cell_tanh[k] = tc;
            hidden[k] = gates[2][k] * tc;
        }
    }

    let sequence = Tensor::produced(&[steps, hs], hidden.clone(), "LSTM")?;
    let last = Tensor::vector(hidden[(steps - 1) * hs..].to_vec())?;
    Ok(LstmOutput {
        last,
        sequence,
        cache: LstmCache {
            params: p,
            input: x.clone(),
            h0,
            c0,
            gates,
            cell,
            cell_tanh,
            hidden,
        },
    })
}

/// Backpropagation through time. `upstream` is the gradient with respect to
/// the full hidden sequence (`[T, H]`); a loss that reads only `h_T` puts its
/// gradient in the last row.
pub fn lstm_backward<T: Scalar>(
    cache: LstmCache<'_, T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, LstmParams<T>)> {
    let p = cache.params;
    let (hs, ds) = (p.hidden_size(), p.input_size());
    let steps = cache.steps();
    if upstream.shape() != [steps, hs] {
        return Err(Error::Usage(format!(
            "LSTM backward expects upstream [{steps}, {hs}], got {:?}",
            upstream.shape()
        )));
    }
    let mut dw: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hs * ds]);
    let mut du: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hs * hs]);
    let mut db: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hs]);
    let mut dx = vec![T::zero(); steps * ds];

    let mut dh_next = vec![T::zero(); hs];
    let mut dc_next = vec![T::zero(); hs];
    let mut dpre: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hs]);
    let g = upstream.data();
    let xs = cache.input.data();
    let one = T::one();

    for t in (0..steps).rev() {
        let row = t * hs..(t + 1) * hs;
        let (h_prev, c_prev): (&[T], &[T]) = if t == 0 {
            (&cache.h0, &cache.c0)
        } else {
            (
                &cache.hidden[(t - 1) * hs..t * hs],
                &cache.cell[(t - 1) * hs..t * hs],
            )
        };
        for j in 0..hs {
            let k = row.start + j;
            let (i, f, o, cand) = (
                cache.gates[0][k],
                cache.gates[1][k],
                cache.gates[2][k],
                cache.gates[3][k],
            );
            let tc = cache.cell_tanh[k];
            let dh = g[k] + dh_next[j];
            let d_o = dh * tc;
            let dc = dc_next[j] + dh * o * (one - tc * tc);
            let d_i = dc * cand;
            let d_g = dc * i;
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * f;
            dpre[0][j] = d_i * i * (one - i);
            dpre[1][j] = d_f * f * (one - f);
            dpre[2][j] = d_o * o * (one - o);
            dpre[3][j] = d_g * (one - cand * cand);
        }
        let xt = &xs[t * ds..(t + 1) * ds];
        let dxt = &mut dx[t * ds..(t + 1) * ds];
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        for gi in 0..4 {
            let (w, u) = (p.w[gi].data(), p.u[gi].data());
            for j in 0..hs {
                let a = dpre[gi][j];
                if a == T::zero() {
                    continue;
                }
                db[gi][j] += a;
                axpy(a, xt, &mut dw[gi][j * ds..(j + 1) * ds]);
                axpy(a, h_prev, &mut du[gi][j * hs..(j + 1) * hs]);
                axpy(a, &w[j * ds..(j + 1) * ds], dxt);
                axpy(a, &u[j * hs..(j + 1) * hs], &mut dh_next);
            }
        }
    }

    let mk = |v: Vec<T>, shape: &[usize]| Tensor::produced(shape, v, "LSTM backward");
    let [dw0, dw1, dw2, dw3] = dw;
    let [du0, du1, du2, du3] = du;
    let [db0, db1, db2, db3] = db;
    let grads = LstmParams {
        w: [
            mk(dw0, &[hs, ds])?,
            mk(dw1, &[hs, ds])?,
            mk(dw2, &[hs, ds])?,
            mk(dw3, &[hs, ds])?,
        ],
        u: [
            mk(du0, &[hs, hs])?,
            mk(du1, &[hs, hs])?,
            mk(du2, &[hs, hs])?,
            mk(du3, &[hs, hs])?,
        ],
        b: [mk(db0, &[hs])?, mk(db1, &[hs])?, mk(db2, &[hs])?, mk(db3, &[hs])?],
    };
    Ok((mk(dx, cache.input.shape())?, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_states() {
        let p = LstmParams::<f64>::zeros(3, 2);
        let mut rng = Rng::new(1);
        let x = Tensor::rand_uniform(&mut rng, &[5, 2], -3.0, 3.0).unwrap();
        let out = lstm_forward(&x, &p, None, None).unwrap();
        for t in 0..5 {
            for g in [Gate::Input, Gate::Forget, Gate::Output] {
                assert!(out.cache.gate(g, t).iter().all(|&v| v == 0.5));
            }
            assert!(out.cache.gate(Gate::Cell, t).iter().all(|&v| v == 0.0));
            assert!(out.cache.cell_state(t).iter().all(|&v| v == 0.0));
        }
        assert!(out.sequence.data().iter().all(|&v| v == 0.0));
        assert!(out.last.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_candidate_bias() {
        let beta = 0.8_f64;
        let mut p = LstmParams::<f64>::zeros(1, 1);
        p.b[Gate::Cell as usize] = Tensor::vector(vec![beta]).unwrap();
        let x = Tensor::matrix(1, 1, vec![2.5]).unwrap();
        let out = lstm_forward(&x, &p, None, None).unwrap();
        let cand = beta.tanh();
        let c1 = 0.5 * cand;
        let h1 = 0.5 * c1.tanh();
        assert!((out.cache.gate(Gate::Cell, 0)[0] - cand).abs() < 1e-15);
        assert!((out.cache.cell_state(0)[0] - c1).abs() < 1e-15);
        assert!((out.last.data()[0] - h1).abs() < 1e-15);
    }

    #[test]
    fn gate_codomains() {
        let mut rng = Rng::new(77);
        for _ in 0..10 {
            let p = LstmParams::<f64>::init(&mut rng, 4, 3);
            let x = Tensor::rand_uniform(&mut rng, &[6, 3], -5.0, 5.0).unwrap();
            let out = lstm_forward(&x, &p, None, None).unwrap();
            for t in 0..6 {
                for g in [Gate::Input, Gate::Forget, Gate::Output] {
                    assert!(out.cache.gate(g, t).iter().all(|&v| v > 0.0 && v < 1.0));
                }
                assert!(out.cache.gate(Gate::Cell, t).iter().all(|&v| v.abs() < 1.0));
            }
        }
    }

    #[test]
    fn input_width_mismatch() {
        let p = LstmParams::<f64>::zeros(2, 3);
        let x = Tensor::<f64>::zeros(&[4, 2]);
        assert!(matches!(lstm_forward(&x, &p, None, None), Err(Error::Shape(_))));
    }

    #[test]
    fn last_is_final_row_of_sequence() {
        let mut rng = Rng::new(4);
        let p = LstmParams::<f64>::init(&mut rng, 3, 1);
        let x = Tensor::rand_uniform(&mut rng, &[7, 1], 0.0, 1.0).unwrap();
        let out = lstm_forward(&x, &p, None, None).unwrap();
        assert_eq!(out.last.data(), out.sequence.row(6));
    }
}
