use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar>(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    Tensor::rand_uniform(rng, shape, T::lit(-limit), T::lit(limit))
        .expect("glorot limits are finite and ordered")
}
