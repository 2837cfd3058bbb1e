//! Dense row-major kernels shared by the batched layer paths.
//!
//! Every output element accumulates its products in ascending inner index,
//! one product at a time, so results do not depend on blocking or SIMD width.
//! When the build enables FMA each step is a single fused multiply-add,
//! otherwise a separate multiply and add.

use crate::scalar::Scalar;

/// `acc + a·b`, fused when the target has FMA.
#[inline(always)]
pub(crate) fn madd<T: Scalar>(acc: T, a: T, b: T) -> T {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, acc)
    } else {
        acc + a * b
    }
}

const MR: usize = 4;
const NR: usize = 16;

/// `out[m×n] += a[m×k] · b[k×n]`.
pub(crate) fn gemm_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    gemm_strided::<T, false>(a, b, out, m, k, n);
}

/// `out[m×n] += aᵀ · b[k×n]` with `a` stored as `[k×m]`.
pub(crate) fn gemm_tn_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    gemm_strided::<T, true>(a, b, out, m, k, n);
}

/// Core kernel; the left operand is `[m×k]`, or `[k×m]` when `TRANS_A`.
/// Full `MR×NR` tiles are accumulated in registers over the whole inner
/// dimension; ragged edges fall back to a plain loop with the same order.
fn gemm_strided<T: Scalar, const TRANS_A: bool>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let full_cols = n - n % NR;
    for j0 in (0..full_cols).step_by(NR) {
        let mut i = 0;
        while i + MR <= m {
            tile::<T, TRANS_A, MR>(a, b, out, i, j0, m, k, n);
            i += MR;
        }
        while i < m {
            tile::<T, TRANS_A, 1>(a, b, out, i, j0, m, k, n);
            i += 1;
        }
    }
    if full_cols < n {
        for i in 0..m {
            for j in full_cols..n {
                let mut acc = out[i * n + j];
                for p in 0..k {
                    let ap = if TRANS_A { a[p * m + i] } else { a[i * k + p] };
                    acc = madd(acc, ap, b[p * n + j]);
                }
                out[i * n + j] = acc;
            }
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn tile<T: Scalar, const TRANS_A: bool, const R: usize>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    i0: usize,
    j0: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    let mut acc = [[T::zero(); NR]; R];
    for (r, row) in acc.iter_mut().enumerate() {
        row.copy_from_slice(&out[(i0 + r) * n + j0..][..NR]);
    }
    for p in 0..k {
        let bp: &[T; NR] = b[p * n + j0..][..NR].try_into().unwrap();
        for (r, row) in acc.iter_mut().enumerate() {
            let ap = if TRANS_A { a[p * m + i0 + r] } else { a[(i0 + r) * k + p] };
            for c in 0..NR {
                row[c] = madd(row[c], ap, bp[c]);
            }
        }
    }
    for (r, row) in acc.iter().enumerate() {
        out[(i0 + r) * n + j0..][..NR].copy_from_slice(row);
    }
}

/// Row-major `[rows×cols]` to `[cols×rows]`.
pub(crate) fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), rows * cols);
    let mut out = vec![T::zero(); a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn gemm_matches_naive_triple_loop() {
        let mut rng = Rng::new(4);
        for _ in 0..30 {
            let (m, k, n) = (1 + rng.below(20), 1 + rng.below(13), 1 + rng.below(300));
            let a: Vec<f64> = (0..m * k).map(|_| rng.uniform() - 0.5).collect();
            let b: Vec<f64> = (0..k * n).map(|_| rng.uniform() - 0.5).collect();
            let init: Vec<f64> = (0..m * n).map(|_| rng.uniform()).collect();
            let mut out = init.clone();
            gemm_acc(&a, &b, &mut out, m, k, n);
            for i in 0..m {
                for j in 0..n {
                    let mut s = init[i * n + j];
                    for p in 0..k {
                        s = madd(s, a[i * k + p], b[p * n + j]);
                    }
                    assert_eq!(out[i * n + j], s);
                }
            }
        }
    }

    #[test]
    fn transposed_left_operand() {
        let mut rng = Rng::new(5);
        let (m, k, n) = (7, 9, 11);
        let a: Vec<f64> = (0..m * k).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.uniform()).collect();
        let mut direct = vec![0.0; m * n];
        gemm_acc(&a, &b, &mut direct, m, k, n);
        let mut via_t = vec![0.0; m * n];
        gemm_tn_acc(&transpose(&a, m, k), &b, &mut via_t, m, k, n);
        assert_eq!(direct, via_t);
    }

    #[test]
    fn transpose_round_trips() {
        let a: Vec<f64> = (0..6).map(f64::from).collect();
        let t = transpose(&a, 2, 3);
        assert_eq!(t, vec![0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        assert_eq!(transpose(&t, 3, 2), a);
    }
}
