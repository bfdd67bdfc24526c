use super::{axpy, dot, norm2, Cholesky, DenseMatrix, LinalgError, LinearOperator, Lu};
use crate::scalar::Real;

/// Solution of the equality-constrained QP step system
///
/// ```text
/// [ H  -J^T ] [ s      ]     [ g ]
/// [ J   0   ] [ lambda ] = - [ c ]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution<T> {
    pub step: Vec<T>,
    pub multiplier: Vec<T>,
    pub cg_iterations: usize,
    /// Norm of the reduced (projected) residual when CG stopped; zero for direct solves.
    pub residual_norm: T,
    /// CG met a direction with curvature at or below the configured floor.
    pub indefinite: bool,
    /// Smallest Rayleigh quotient `p^T H p / p^T p` seen over CG directions.
    pub min_curvature: T,
}

/// Factored row space of a full-row-rank Jacobian `J`.
///
/// Provides the minimum-norm particular solution, the nullspace projector
/// `P = I - J^T (J J^T)^{-1} J` (applied, never formed), and least-squares
/// multipliers.
#[derive(Debug, Clone)]
pub struct RowSpace<T> {
    j: DenseMatrix<T>,
    gram: Option<Cholesky<T>>,
}

impl<T: Real> RowSpace<T> {
    /// Factors `J J^T` with pivot tolerance `1e-12 * ||J||_F^2`.
    pub fn new(j: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        if j.rows() == 0 {
            return Ok(Self {
                j: j.clone(),
                gram: None,
            });
        }
        let fro = j.frobenius_norm();
        let tol = T::lit(1e-12) * fro * fro;
        let gram = Cholesky::factor(&j.gram_rows(), tol)?;
        Ok(Self {
            j: j.clone(),
            gram: Some(gram),
        })
    }

    pub fn jacobian(&self) -> &DenseMatrix<T> {
        &self.j
    }

    /// `(J J^T)^{-1} r`
    pub fn gram_solve(&self, r: &[T]) -> Vec<T> {
        match &self.gram {
            Some(ch) => ch.solve(r),
            None => Vec::new(),
        }
    }

    /// `-J^T (J J^T)^{-1} c`
    pub fn particular(&self, c: &[T]) -> Vec<T> {
        if self.gram.is_none() {
            return vec![T::zero(); self.j.cols()];
        }
        let y = self.gram_solve(c);
        self.j.tr_matvec(&y).into_iter().map(|v| -v).collect()
    }

    /// `P v`
    pub fn project(&self, v: &[T]) -> Vec<T> {
        if self.gram.is_none() {
            return v.to_vec();
        }
        let y = self.gram_solve(&self.j.matvec(v));
        let mut out = v.to_vec();
        axpy(-T::one(), &self.j.tr_matvec(&y), &mut out);
        out
    }

    /// `(J J^T)^{-1} J r`: the least-squares solution of `J^T lambda = r`.
    pub fn multiplier(&self, r: &[T]) -> Vec<T> {
        if self.gram.is_none() {
            return Vec::new();
        }
        self.gram_solve(&self.j.matvec(r))
    }
}

/// Minimum-norm solution of `J s = -c`.
pub fn min_norm_particular<T: Real>(j: &DenseMatrix<T>, c: &[T]) -> Result<Vec<T>, LinalgError> {
    if c.len() != j.rows() {
        return Err(LinalgError::DimensionMismatch("constraint vector length".into()));
    }
    Ok(RowSpace::new(j)?.particular(c))
}

/// Projection of `v` onto the nullspace of `J`.
pub fn apply_nullspace_projector<T: Real>(
    j: &DenseMatrix<T>,
    v: &[T],
) -> Result<Vec<T>, LinalgError> {
    if v.len() != j.cols() {
        return Err(LinalgError::DimensionMismatch("vector length".into()));
    }
    Ok(RowSpace::new(j)?.project(v))
}

/// Stopping controls for the projected CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions<T> {
    /// Absolute reduced-residual tolerance; `None` selects `min(1e-10, 0.1 ||r_0||)`.
    pub tol: Option<T>,
    /// Iteration cap; `None` selects `2n`.
    pub max_iter: Option<usize>,
    /// Directions with `p^T H p <= floor * p^T p` stop the iteration as indefinite.
    pub curvature_floor: T,
}

impl<T: Real> Default for CgOptions<T> {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: None,
            curvature_floor: T::zero(),
        }
    }
}

/// Solves the step system by the nullspace method: `s = s_c + P s_0`, where `s_0`
/// approximately minimizes `1/2 s_0^T P H P s_0 + (P (g + H s_c))^T s_0` by
/// conjugate gradients, and `lambda = (J J^T)^{-1} J (g + H s)`.
pub fn solve_kkt_projected<T: Real>(
    h: &dyn LinearOperator<T>,
    j: &DenseMatrix<T>,
    g: &[T],
    c: &[T],
    opts: &CgOptions<T>,
) -> Result<KktSolution<T>, LinalgError> {
    let n = g.len();
    check_dims(h.dim(), j, g, c)?;
    let rs = RowSpace::new(j)?;
    let sc = rs.particular(c);

    // reduced gradient b = P(g + H s_c); CG solves (P H P) z = -b on N(J)
    let mut gh = h.apply(&sc);
    axpy(T::one(), g, &mut gh);
    let mut r: Vec<T> = rs.project(&gh).into_iter().map(|v| -v).collect();
    let r0 = norm2(&r);
    // projecting a row-space vector leaves rounding noise of this size; CG on it
    // would only see spurious curvature
    let noise = T::lit(10.0) * T::from_usize_lossy(n.max(1)) * T::epsilon() * norm2(&gh);
    let tol = opts.tol.unwrap_or_else(|| T::lit(1e-10).min(T::lit(0.1) * r0)).max(noise);
    let max_iter = opts.max_iter.unwrap_or(2 * n);

    let mut z = vec![T::zero(); n];
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iters = 0;
    let mut indefinite = false;
    let mut min_curv = T::infinity();
    while iters < max_iter && rr.sqrt() > tol {
        let q = rs.project(&h.apply(&p));
        let pp = dot(&p, &p);
        let curv = dot(&p, &q);
        min_curv = min_curv.min(curv / pp);
        if curv <= opts.curvature_floor * pp {
            indefinite = true;
            break;
        }
        let alpha = rr / curv;
        axpy(alpha, &p, &mut z);
        axpy(-alpha, &q, &mut r);
        r = rs.project(&r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        iters += 1;
    }

    let mut step = rs.project(&z);
    axpy(T::one(), &sc, &mut step);
    let mut gh = h.apply(&step);
    axpy(T::one(), g, &mut gh);
    let multiplier = rs.multiplier(&gh);
    Ok(KktSolution {
        step,
        multiplier,
        cg_iterations: iters,
        residual_norm: rr.sqrt(),
        indefinite,
        min_curvature: min_curv,
    })
}

/// Direct LU solve of the full `(n+m) x (n+m)` KKT matrix.
pub fn dense_kkt_oracle<T: Real>(
    h: &DenseMatrix<T>,
    j: &DenseMatrix<T>,
    g: &[T],
    c: &[T],
) -> Result<KktSolution<T>, LinalgError> {
    let n = g.len();
    let m = c.len();
    check_dims(h.rows(), j, g, c)?;
    if h.cols() != n {
        return Err(LinalgError::DimensionMismatch("Hessian is not square".into()));
    }
    let mut k = DenseMatrix::zeros(n + m, n + m);
    for a in 0..n {
        for b in 0..n {
            k.set(a, b, h.get(a, b));
        }
    }
    for i in 0..m {
        for a in 0..n {
            k.set(n + i, a, j.get(i, a));
            k.set(a, n + i, -j.get(i, a));
        }
    }
    let rhs: Vec<T> = g.iter().chain(c).map(|&v| -v).collect();
    let lu = Lu::factor(&k).ok_or(LinalgError::SingularKkt)?;
    let sol = lu.solve(&rhs);
    if !super::all_finite(&sol) {
        return Err(LinalgError::SingularKkt);
    }
    Ok(KktSolution {
        step: sol[..n].to_vec(),
        multiplier: sol[n..].to_vec(),
        cg_iterations: 0,
        residual_norm: T::zero(),
        indefinite: false,
        min_curvature: T::nan(),
    })
}

fn check_dims<T: Real>(
    hdim: usize,
    j: &DenseMatrix<T>,
    g: &[T],
    c: &[T],
) -> Result<(), LinalgError> {
    if hdim != g.len() || j.cols() != g.len() || j.rows() != c.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "H {}, J {}x{}, g {}, c {}",
            hdim,
            j.rows(),
            j.cols(),
            g.len(),
            c.len()
        )));
    }
    Ok(())
}
