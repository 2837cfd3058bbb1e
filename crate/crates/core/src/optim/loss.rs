use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped into `[P_MIN, 1 - P_MIN]` before the log.
pub const P_MIN: f64 = 1e-12;

/// Mean binary cross-entropy and its gradient with respect to the logits.
///
/// Returns `(loss, dL/dz)` where `dL/dz_i = (p_i - y_i) / n`.
pub fn bce_loss<T: Scalar>(p: &[T], y: &[u8]) -> Result<(f64, Tensor<T>)> {
    weighted_bce_loss(p, y, 1.0)
}

/// BCE with positive-class (attack) terms multiplied by `pos_weight`.
pub fn weighted_bce_loss<T: Scalar>(p: &[T], y: &[u8], pos_weight: f64) -> Result<(f64, Tensor<T>)> {
    if p.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} probabilities for {} labels",
            p.len(),
            y.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::Input("loss over an empty batch".into()));
    }
    if !(pos_weight.is_finite() && pos_weight > 0.0) {
        return Err(Error::Parameter(format!("positive weight must be > 0, got {pos_weight}")));
    }
    let n = p.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (i, (&pi, &yi)) in p.iter().zip(y).enumerate() {
        let pf = pi.as_f64();
        if !pf.is_finite() {
            return Err(Error::NonFinite(format!("probability {i} is {pf}")));
        }
        let pc = pf.clamp(P_MIN, 1.0 - P_MIN);
        let g = match yi {
            1 => {
                total -= pos_weight * pc.ln();
                pos_weight * (pf - 1.0)
            }
            0 => {
                total -= (1.0 - pc).ln();
                pf
            }
            other => return Err(Error::Label(format!("label {other} at position {i} is not 0 or 1"))),
        };
        grad.push(T::lit(g / n));
    }
    let loss = total / n;
    Ok((loss, Tensor::produced(&[p.len()], grad, "loss gradient")?))
}
