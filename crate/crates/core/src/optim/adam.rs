use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !unit(self.beta1) || !unit(self.beta2) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("invalid Adam constants {self:?}")));
        }
        Ok(())
    }
}

/// Moment accumulators, one pair per parameter array.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f64> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    /// Number of completed steps.
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[&Tensor<T>]) -> Self {
        Self {
            m: params.iter().map(|p| p.zeros_like()).collect(),
            v: params.iter().map(|p| p.zeros_like()).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every array in `params`.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "{} parameter arrays, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, ((p, g), m)) in params.iter().zip(grads).zip(&state.m).enumerate() {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::Dimension(format!(
                "array {i}: parameter {:?}, gradient {:?}, moment {:?}",
                p.shape(),
                g.shape(),
                m.shape()
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (c1, c2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let (inv_bc1, inv_bc2) = (T::lit(1.0 / bc1), T::lit(1.0 / bc2));
    let (lr, eps) = (T::lit(lr), T::lit(cfg.epsilon));

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let gd = g.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        let pd = p.data_mut();
        for j in 0..pd.len() {
            let gj = gd[j];
            md[j] = b1 * md[j] + c1 * gj;
            vd[j] = b2 * vd[j] + c2 * gj * gj;
            let mhat = md[j] * inv_bc1;
            let vhat = vd[j] * inv_bc2;
            pd[j] -= lr * mhat / (vhat.sqrt() + eps);
        }
        if pd.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Adam update produced a non-finite parameter".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(theta: &mut Tensor<f64>, g: f64, st: &mut AdamState<f64>, lr: f64) {
        let grad = Tensor::vector(vec![g]).unwrap();
        adam_step(&mut [theta], &[&grad], st, lr, &AdamConfig::default()).unwrap();
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for g in [3.7, -0.002, 1e-3] {
            let mut theta = Tensor::vector(vec![1.0]).unwrap();
            let mut st = AdamState::new(&[&theta]);
            step_scalar(&mut theta, g, &mut st, 0.01);
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((theta.data()[0] - expected).abs() < 1e-15);
            assert_eq!(st.t, 1);
            assert!((st.m[0].data()[0] / 0.1 - g).abs() < 1e-12 * g.abs().max(1.0));
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut theta = Tensor::vector(vec![0.25, -4.0]).unwrap();
        let before = theta.clone();
        let zero = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let mut st = AdamState::new(&[&theta]);
        for _ in 0..25 {
            adam_step(&mut [&mut theta], &[&zero], &mut st, 0.1, &AdamConfig::default()).unwrap();
        }
        assert_eq!(theta, before);
        assert_eq!(st.t, 25);
    }

    #[test]
    fn constant_gradient_saturates_at_lr() {
        let mut theta = Tensor::vector(vec![0.0]).unwrap();
        let mut st = AdamState::new(&[&theta]);
        let lr = 0.001;
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..5000 {
            step_scalar(&mut theta, 0.3, &mut st, lr);
            last_step = prev - theta.data()[0];
            prev = theta.data()[0];
        }
        assert!((last_step - lr).abs() < 1e-6 * lr.max(1.0), "{last_step}");
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut theta = Tensor::vector(vec![0.0, 1.0]).unwrap();
        let mut st = AdamState::new(&[&theta]);
        let g = Tensor::vector(vec![1.0]).unwrap();
        let err = adam_step(&mut [&mut theta], &[&g], &mut st, 0.1, &AdamConfig::default());
        assert!(matches!(err, Err(Error::Dimension(_))));
        assert_eq!(st.t, 0);
    }
}
