//! Random instances shared by the property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenseMatrix;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub(crate) fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// `A^T A + n I`, comfortably positive definite.
pub(crate) fn spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix<f64> {
    let a = matrix(rng, n, n);
    let mut h = a.transpose().matmul(&a);
    h.add_diagonal(n as f64 * 0.5 + 0.5);
    h
}

/// Random `m x n` matrix with a well-conditioned Gram matrix.
pub(crate) fn full_rank(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    loop {
        let j = matrix(rng, m, n);
        let eig = super::symmetric_eigenvalues(&j.gram_rows());
        if eig.first().is_none_or(|e| *e > 1e-2) {
            return j;
        }
    }
}
