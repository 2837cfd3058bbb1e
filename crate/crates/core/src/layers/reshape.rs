use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct FlattenCache {
    shape: Vec<usize>,
}

/// Row-major flatten (time-step major, channel minor).
pub fn flatten<T: Scalar>(p: &Tensor<T>) -> (Tensor<T>, FlattenCache) {
    let out = p
        .reshape(&[p.len()])
        .expect("flatten of a valid tensor is always valid");
    (
        out,
        FlattenCache {
            shape: p.shape().to_vec(),
        },
    )
}

pub fn unflatten<T: Scalar>(cache: FlattenCache, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let n: usize = cache.shape.iter().product();
    if upstream.shape() != [n] {
        return Err(Error::Usage(format!(
            "flatten backward expects upstream [{n}], got {:?}",
            upstream.shape()
        )));
    }
    upstream.reshape(&cache.shape)
}

#[derive(Debug)]
pub struct ConcatCache {
    left: usize,
    right: usize,
}

/// `[left..., right...]` for two rank-1 tensors.
pub fn concat<T: Scalar>(left: &Tensor<T>, right: &Tensor<T>) -> Result<(Tensor<T>, ConcatCache)> {
    if left.rank() != 1 || right.rank() != 1 {
        return Err(Error::Shape(format!(
            "concat needs rank-1 operands, got {:?} and {:?}",
            left.shape(),
            right.shape()
        )));
    }
    let mut data = Vec::with_capacity(left.len() + right.len());
    data.extend_from_slice(left.data());
    data.extend_from_slice(right.data());
    Ok((
        Tensor::vector(data)?,
        ConcatCache {
            left: left.len(),
            right: right.len(),
        },
    ))
}

/// Splits the upstream gradient back into `(left, right)`.
pub fn concat_backward<T: Scalar>(
    cache: ConcatCache,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if upstream.shape() != [cache.left + cache.right] {
        return Err(Error::Usage(format!(
            "concat backward expects upstream [{}], got {:?}",
            cache.left + cache.right,
            upstream.shape()
        )));
    }
    let (l, r) = upstream.data().split_at(cache.left);
    Ok((Tensor::vector(l.to_vec())?, Tensor::vector(r.to_vec())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flatten_examples() {
        let m = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (f, _) = flatten(&m);
        assert_eq!(f.shape(), &[4]);
        assert_eq!(f.data(), &[1.0, 2.0, 3.0, 4.0]);
        let one = Tensor::matrix(1, 1, vec![9.0]).unwrap();
        assert_eq!(flatten(&one).0.data(), &[9.0]);
    }

    #[test]
    fn concat_examples() {
        let a = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let b = Tensor::vector(vec![3.0]).unwrap();
        assert_eq!(concat(&a, &b).unwrap().0.data(), &[1.0, 2.0, 3.0]);
        let empty = Tensor::<f64>::vector(vec![]).unwrap();
        let five = Tensor::vector(vec![5.0]).unwrap();
        assert_eq!(concat(&empty, &five).unwrap().0.data(), &[5.0]);
    }

    #[test]
    fn concat_backward_splits() {
        let a = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let b = Tensor::vector(vec![3.0]).unwrap();
        let (_, cache) = concat(&a, &b).unwrap();
        let g = Tensor::vector(vec![0.1, 0.2, 0.3]).unwrap();
        let (ga, gb) = concat_backward(cache, &g).unwrap();
        assert_eq!(ga.data(), &[0.1, 0.2]);
        assert_eq!(gb.data(), &[0.3]);
    }

    proptest! {
        #[test]
        fn flatten_unflatten_identity(l in 1usize..8, c in 1usize..8, seed in 0u64..1000) {
            let mut rng = crate::rng::Rng::new(seed);
            let t = Tensor::<f64>::rand_uniform(&mut rng, &[l, c], -1.0, 1.0).unwrap();
            let (f, cache) = flatten(&t);
            prop_assert_eq!(f.len(), l * c);
            prop_assert_eq!(unflatten(cache, &f).unwrap(), t);
        }

        #[test]
        fn concat_length_law(a in 0usize..10, b in 0usize..10) {
            let x = Tensor::<f64>::vector(vec![1.0; a]).unwrap();
            let y = Tensor::<f64>::vector(vec![2.0; b]).unwrap();
            prop_assert_eq!(concat(&x, &y).unwrap().0.len(), a + b);
        }
    }
}
