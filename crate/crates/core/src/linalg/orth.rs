use super::{axpy, dot, norm2, DenseMatrix};
use crate::scalar::Real;

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Columns are processed in order; a column whose remaining norm after
/// projection falls to `drop_tol * (original norm)` or below is discarded.
/// Returns an `n x r` matrix with orthonormal columns (`0 x 0` for empty input).
pub fn orthonormalize<T: Real>(columns: &[Vec<T>], drop_tol: T) -> DenseMatrix<T> {
    let n = columns.first().map_or(0, Vec::len);
    let mut basis: Vec<Vec<T>> = Vec::new();
    for col in columns {
        assert_eq!(col.len(), n, "orthonormalize: column length");
        let orig = norm2(col);
        if !(orig > T::zero()) || !orig.is_finite() {
            continue;
        }
        let mut w = col.clone();
        for _pass in 0..2 {
            for q in &basis {
                let r = dot(q, &w);
                axpy(-r, q, &mut w);
            }
        }
        let rem = norm2(&w);
        if rem <= drop_tol * orig {
            continue;
        }
        let inv = T::one() / rem;
        w.iter_mut().for_each(|v| *v = *v * inv);
        basis.push(w);
    }
    DenseMatrix::from_columns(n, &basis).expect("finite orthonormal columns")
}
