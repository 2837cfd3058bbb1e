//! Dense row-major arrays of rank 1 to 3.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{relu, sigmoid, Scalar};

pub const MAX_RANK: usize = 3;

/// Dense real array, row-major (last axis fastest).
///
/// Every constructor rejects non-finite elements, so a `Tensor` in hand is
/// always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Per-element operations. Binary ops require identical shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Relu,
    Tanh,
    Sigmoid,
}

impl Elementwise {
    pub fn is_binary(self) -> bool {
        matches!(self, Elementwise::Add | Elementwise::Sub | Elementwise::Mul)
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::Shape(format!(
            "rank must be 1..={MAX_RANK}, got shape {shape:?}"
        )));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {n} elements, buffer has {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "tensor element {i} of shape {shape:?}"
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Constructor for buffers produced by layer code; `what` names the
    /// producer in the non-finite error.
    pub(crate) fn produced(shape: &[usize], data: Vec<T>, what: &str) -> Result<Self> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = check_shape(shape).expect("zeros: invalid rank");
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Self::new(shape, vec![value; n])
    }

    pub fn vector(data: Vec<T>) -> Result<Self> {
        let n = data.len();
        Self::new(&[n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(&[rows, cols], data)
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Mutable access for in-place parameter updates. Callers must keep the
    /// buffer finite.
    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Sets one element; rejects non-finite values.
    pub fn set_flat(&mut self, index: usize, value: T) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("set_flat".into()));
        }
        let len = self.data.len();
        let slot = self
            .data
            .get_mut(index)
            .ok_or_else(|| Error::Shape(format!("flat index {index} out of range {len}")))?;
        *slot = value;
        Ok(())
    }

    pub fn flat_index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.shape.len() {
            return Err(Error::Shape(format!(
                "{} coordinates for rank-{} tensor",
                coords.len(),
                self.shape.len()
            )));
        }
        let mut idx = 0;
        for (&c, &extent) in coords.iter().zip(&self.shape) {
            if c >= extent {
                return Err(Error::Shape(format!(
                    "coordinate {coords:?} out of bounds for shape {:?}",
                    self.shape
                )));
            }
            idx = idx * extent + c;
        }
        Ok(idx)
    }

    pub fn coords(&self, mut index: usize) -> Result<Vec<usize>> {
        if index >= self.data.len() {
            return Err(Error::Shape(format!(
                "flat index {index} out of range {}",
                self.data.len()
            )));
        }
        let mut out = vec![0; self.shape.len()];
        for (slot, &extent) in out.iter_mut().zip(&self.shape).rev() {
            *slot = index % extent;
            index /= extent;
        }
        Ok(out)
    }

    pub fn at(&self, coords: &[usize]) -> Result<T> {
        Ok(self.data[self.flat_index(coords)?])
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[T] {
        assert_eq!(self.rank(), 2, "row() on rank-{} tensor", self.rank());
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T, what: &str) -> Result<Self> {
        Self::produced(&self.shape, self.data.iter().map(|&v| f(v)).collect(), what)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Infinity norm; zero for empty tensors.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape == other.shape
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dimension(format!(
                "add_assign {:?} += {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn elementwise(op: Elementwise, a: &Self, b: Option<&Self>) -> Result<Self> {
        let name = format!("{op:?}");
        if op.is_binary() {
            let b = b.ok_or_else(|| Error::Usage(format!("{name} needs two operands")))?;
            if !a.same_shape(b) {
                return Err(Error::Dimension(format!(
                    "{name}: shapes {:?} and {:?} differ",
                    a.shape, b.shape
                )));
            }
            let f = match op {
                Elementwise::Add => |x: T, y: T| x + y,
                Elementwise::Sub => |x: T, y: T| x - y,
                _ => |x: T, y: T| x * y,
            };
            let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
            return Self::produced(&a.shape, data, &name);
        }
        if b.is_some() {
            return Err(Error::Usage(format!("{name} takes one operand")));
        }
        match op {
            Elementwise::Relu => a.map(relu, &name),
            Elementwise::Tanh => a.map(|v| v.tanh(), &name),
            _ => a.map(sigmoid, &name),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::elementwise(Elementwise::Add, self, Some(other))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::elementwise(Elementwise::Sub, self, Some(other))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        Self::elementwise(Elementwise::Mul, self, Some(other))
    }

    pub fn relu(&self) -> Result<Self> {
        Self::elementwise(Elementwise::Relu, self, None)
    }

    pub fn tanh(&self) -> Result<Self> {
        Self::elementwise(Elementwise::Tanh, self, None)
    }

    pub fn sigmoid(&self) -> Result<Self> {
        Self::elementwise(Elementwise::Sigmoid, self, None)
    }

    /// Matrix product. Each output element is accumulated over the inner
    /// index in ascending order.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::Dimension(format!(
                "matmul needs rank-2 operands, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::Dimension(format!(
                "matmul inner extents differ: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let c = &mut out[i * n..(i + 1) * n];
            for t in 0..k {
                let a = self.data[i * k + t];
                crate::scalar::axpy(a, &other.data[t * n..(t + 1) * n], c);
            }
        }
        Self::produced(&[m, n], out, "matmul")
    }

    /// i.i.d. uniform draws in `[lo, hi)`.
    pub fn rand_uniform(rng: &mut Rng, shape: &[usize], lo: T, hi: T) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Parameter(format!(
                "rand_uniform needs finite lo < hi, got [{lo}, {hi})"
            )));
        }
        let n = check_shape(shape)?;
        let (lo64, hi64) = (lo.as_f64(), hi.as_f64());
        let data = (0..n)
            .map(|_| loop {
                let v = T::lit(lo64 + (hi64 - lo64) * rng.uniform());
                // rounding into a narrower type can land on `hi`
                if v < hi {
                    break v;
                }
            })
            .collect();
        Self::new(shape, data)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..k {
                    s += a[i * k + t] * b[t * n + j];
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn matmul_examples() {
        let i2 = Tensor::<f64>::identity(2);
        let v = Tensor::matrix(2, 1, vec![5.0, 7.0]).unwrap();
        assert_eq!(i2.matmul(&v).unwrap().data(), &[5.0, 7.0]);

        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ones = Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap();
        let c = a.matmul(&ones).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[3.0, 7.0]);

        let z = Tensor::<f64>::zeros(&[2, 3]);
        assert!(a.matmul(&z).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        assert!(matches!(a.matmul(&a), Err(Error::Dimension(_))));
    }

    #[test]
    fn matmul_chain_matches_triple_loop() {
        let mut rng = Rng::new(11);
        for _ in 0..20 {
            let a = Tensor::<f64>::rand_uniform(&mut rng, &[3, 3], -1.0, 1.0).unwrap();
            let b = Tensor::<f64>::rand_uniform(&mut rng, &[3, 3], -1.0, 1.0).unwrap();
            let c = Tensor::<f64>::rand_uniform(&mut rng, &[3, 3], -1.0, 1.0).unwrap();
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let ab = naive_matmul(a.data(), b.data(), 3, 3, 3);
            let oracle = naive_matmul(&ab, c.data(), 3, 3, 3);
            for ((l, r), o) in left.data().iter().zip(right.data()).zip(&oracle) {
                assert!((l - o).abs() <= 1e-12);
                assert!((r - o).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn elementwise_examples() {
        let v = Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(v.relu().unwrap().data(), &[0.0, 0.0, 2.0]);
        let z = Tensor::vector(vec![0.0]).unwrap();
        assert_eq!(z.sigmoid().unwrap().data(), &[0.5]);
        let l3 = Tensor::vector(vec![3.0f64.ln()]).unwrap();
        assert!((l3.sigmoid().unwrap().data()[0] - 0.75).abs() < 1e-15);
        let w = Tensor::vector(vec![1.0, 2.0]).unwrap();
        assert!(matches!(v.add(&w), Err(Error::Dimension(_))));
        assert_eq!(
            v.mul(&v).unwrap().data(),
            &[1.0, 0.0, 4.0],
            "mul is per element"
        );
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(matches!(
            Tensor::vector(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        let big = Tensor::vector(vec![f64::MAX]).unwrap();
        assert!(matches!(big.add(&big), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rank_limits() {
        assert!(Tensor::<f64>::new(&[1, 1, 1, 1], vec![0.0]).is_err());
        assert!(Tensor::<f64>::new(&[], vec![]).is_err());
        assert!(Tensor::<f64>::new(&[2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn rand_uniform_range_and_determinism() {
        let mut r1 = Rng::new(5);
        let mut r2 = Rng::new(5);
        let a = Tensor::<f64>::rand_uniform(&mut r1, &[10, 10], 0.0, 1.0).unwrap();
        let b = Tensor::<f64>::rand_uniform(&mut r2, &[10, 10], 0.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| (0.0..1.0).contains(&v)));
        assert!(matches!(
            Tensor::<f64>::rand_uniform(&mut r1, &[2], 1.0, 1.0),
            Err(Error::Parameter(_))
        ));
        let f = Tensor::<f32>::rand_uniform(&mut r1, &[1000], 0.0, 1.0).unwrap();
        assert!(f.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn rand_uniform_mean() {
        let mut rng = Rng::new(2024);
        let t = Tensor::<f64>::rand_uniform(&mut rng, &[100_000], 0.0, 1.0).unwrap();
        let mean = t.sum() / t.len() as f64;
        assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");
    }

    proptest! {
        #[test]
        fn index_coords_round_trip(a in 1usize..6, b in 1usize..6, c in 1usize..6) {
            let t = Tensor::<f64>::zeros(&[a, b, c]);
            for i in 0..t.len() {
                let co = t.coords(i).unwrap();
                prop_assert_eq!(t.flat_index(&co).unwrap(), i);
            }
            let m = Tensor::<f64>::zeros(&[a, b]);
            for i in 0..a {
                for j in 0..b {
                    prop_assert_eq!(m.flat_index(&[i, j]).unwrap(), i * b + j);
                }
            }
        }
    }
}
