//! Small dense kernels used by the SQP step computation.
//!
//! Everything here works on row-major [`DenseMatrix`] values and plain slices.
//! Sizes are desk scale (tens to a few hundred unknowns), so the routines favour
//! clarity and determinism over blocking or SIMD.

mod factor;
mod kkt;
mod matrix;
mod orth;
#[cfg(test)]
pub(crate) mod test_util;

pub use factor::{Cholesky, Lu};
pub use kkt::{
    apply_nullspace_projector, dense_kkt_oracle, min_norm_particular, solve_kkt_projected,
    CgOptions, KktSolution, RowSpace,
};
pub use matrix::{DenseMatrix, LinearOperator, ShiftedOperator};
pub use orth::orthonormalize;

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is rank deficient (pivot {pivot:e} below tolerance {tol:e})")]
    RankDeficient { pivot: f64, tol: f64 },
    #[error("KKT matrix is singular")]
    SingularKkt,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    // scaled to avoid overflow for large entries
    let scale = norm_inf(a);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = a.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

pub fn norm1<T: Real>(a: &[T]) -> T {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| {
        if x.is_nan() {
            T::nan()
        } else {
            m.max(x.abs())
        }
    })
}

/// `y <- y + alpha * x`
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scaled<T: Real>(alpha: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| alpha * x).collect()
}

/// `x + alpha * s`
pub fn step_point<T: Real>(x: &[T], alpha: T, s: &[T]) -> Vec<T> {
    x.iter().zip(s).map(|(&xi, &si)| xi + alpha * si).collect()
}

pub fn all_finite<T: Real>(a: &[T]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &DenseMatrix<T>) -> Vec<T> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "symmetric_eigenvalues needs a square matrix");
    let mut m = a.clone();
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m.get(i, j) * m.get(i, j);
                }
            }
        }
        let diag: T = (0..n).map(|i| m.get(i, i) * m.get(i, i)).sum();
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m.get(i, i)).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}
