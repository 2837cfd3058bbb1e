use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Whether stochastic layers are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug)]
pub struct DropoutCache {
    mask: Vec<bool>,
    scale: f64,
}

impl DropoutCache {
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Inverted dropout. In training each element survives with probability
/// `1 - rate` and is scaled by `1 / (1 - rate)`; inference is the identity.
/// One uniform draw is consumed per element in training mode.
pub fn dropout_forward<T: Scalar>(
    y: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor<T>, DropoutCache)> {
    check_rate(rate)?;
    let mask = match mode {
        Mode::Infer => vec![true; y.len()],
        Mode::Train => (0..y.len()).map(|_| rng.uniform() >= rate).collect(),
    };
    let rate = if mode == Mode::Infer { 0.0 } else { rate };
    dropout_with_mask(y, rate, mask)
}

/// Applies an explicit keep-mask with the inverted-dropout scale for `rate`.
pub fn dropout_with_mask<T: Scalar>(
    y: &Tensor<T>,
    rate: f64,
    mask: Vec<bool>,
) -> Result<(Tensor<T>, DropoutCache)> {
    check_rate(rate)?;
    if mask.len() != y.len() {
        return Err(Error::Dimension(format!(
            "dropout mask has {} entries for {} values",
            mask.len(),
            y.len()
        )));
    }
    let scale = 1.0 / (1.0 - rate);
    let s = T::lit(scale);
    let out = y
        .data()
        .iter()
        .zip(&mask)
        .map(|(&v, &keep)| if keep { v * s } else { T::zero() })
        .collect();
    Ok((
        Tensor::produced(y.shape(), out, "dropout")?,
        DropoutCache { mask, scale },
    ))
}

pub fn dropout_backward<T: Scalar>(cache: DropoutCache, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.len() != cache.mask.len() {
        return Err(Error::Usage(format!(
            "dropout backward expects {} values, got {}",
            cache.mask.len(),
            upstream.len()
        )));
    }
    let s = T::lit(cache.scale);
    let out = upstream
        .data()
        .iter()
        .zip(&cache.mask)
        .map(|(&g, &keep)| if keep { g * s } else { T::zero() })
        .collect();
    Tensor::produced(upstream.shape(), out, "dropout backward")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity_in_training() {
        let y = Tensor::vector(vec![1.0, -2.0, 3.0]).unwrap();
        let (out, cache) = dropout_forward(&y, 0.0, Mode::Train, &mut Rng::new(1)).unwrap();
        assert_eq!(out, y);
        assert!(cache.mask().iter().all(|&k| k));
    }

    #[test]
    fn inference_is_identity() {
        let y = Tensor::vector(vec![1.0, -2.0, 3.0]).unwrap();
        for rate in [0.0, 0.4, 0.9] {
            let (out, _) = dropout_forward(&y, rate, Mode::Infer, &mut Rng::new(1)).unwrap();
            assert_eq!(out, y);
        }
    }

    #[test]
    fn fixed_mask_scales_survivors() {
        let y = Tensor::vector(vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let (out, _) = dropout_with_mask(&y, 0.5, vec![true, false, true, false]).unwrap();
        assert_eq!(out.data(), &[4.0, 0.0, 12.0, 0.0]);
    }

    #[test]
    fn rate_out_of_range() {
        let y = Tensor::vector(vec![1.0]).unwrap();
        for rate in [1.0, 1.5, -0.1] {
            assert!(matches!(
                dropout_forward(&y, rate, Mode::Train, &mut Rng::new(0)),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn expectation_is_preserved() {
        let y = Tensor::vector(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let rate = 0.4;
        let n = 10_000;
        let mut rng = Rng::new(99);
        let mut sums = [0.0; 4];
        let mut sq = [0.0; 4];
        for _ in 0..n {
            let (out, _) = dropout_forward(&y, rate, Mode::Train, &mut rng).unwrap();
            for (k, v) in out.data().iter().enumerate() {
                sums[k] += v;
                sq[k] += v * v;
            }
        }
        for k in 0..4 {
            let mean = sums[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - y.data()[k]).abs() <= 3.0 * se,
                "element {k}: mean {mean}, se {se}"
            );
        }
    }
}
