//! Closed-form test problems with known or reference optima.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use crate::linalg::DenseMatrix;
use crate::problem::{check_len, EvalCounts, EvalError, ProblemFunctions};
use crate::scalar::Real;
use crate::sqp_exact::{solve_exact, HessianStrategy, KktMethod, SolverConfig};
use crate::report::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalyticKind {
    /// `min 1/2 ||x||^2  s.t.  x1 + x2 - 2 = 0`
    P1,
    /// `min x1 + x2  s.t.  x1^2 + x2^2 - 2 = 0`
    P2,
    /// Ten variables, three constraints (sphere, hyperplane, bilinear), nonconvex objective.
    P3,
}

impl AnalyticKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::P1 => "p1",
            Self::P2 => "p2",
            Self::P3 => "p3",
        }
    }
}

const P3_N: usize = 10;
const P3_X0: [f64; P3_N] = [0.5, -0.4, 0.3, 0.8, -0.2, 0.6, 0.1, -0.7, 0.4, 0.9];

fn p3_target(i: usize) -> f64 {
    (i as f64 + 1.0) / 10.0 - 0.3
}

/// Analytic problem with exact derivatives and the exact Lagrangian Hessian.
#[derive(Debug)]
pub struct AnalyticProblem<T> {
    kind: AnalyticKind,
    x0: Vec<T>,
    x_star: Vec<T>,
    lambda_star: Vec<T>,
    values_calls: AtomicUsize,
    derivative_calls: AtomicUsize,
}

impl<T: Real> Clone for AnalyticProblem<T> {
    fn clone(&self) -> Self {
        Self::new(self.kind)
    }
}

impl<T: Real> AnalyticProblem<T> {
    pub fn new(kind: AnalyticKind) -> Self {
        let v = |xs: &[f64]| xs.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let (x0, x_star, lambda_star) = match kind {
            AnalyticKind::P1 => (v(&[0.0, 0.0]), v(&[1.0, 1.0]), v(&[1.0])),
            AnalyticKind::P2 => (v(&[-2.0, -1.0]), v(&[-1.0, -1.0]), v(&[-0.5])),
            AnalyticKind::P3 => {
                let (x, l) = p3_reference();
                (v(&P3_X0), v(x), v(l))
            }
        };
        Self {
            kind,
            x0,
            x_star,
            lambda_star,
            values_calls: AtomicUsize::new(0),
            derivative_calls: AtomicUsize::new(0),
        }
    }

    pub fn kind(&self) -> AnalyticKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    /// Known optimum (analytic for P1/P2, tight-tolerance reference for P3).
    pub fn x_star(&self) -> &[T] {
        &self.x_star
    }

    pub fn lambda_star(&self) -> &[T] {
        &self.lambda_star
    }

    fn f(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        match self.kind {
            AnalyticKind::P1 => half * (x[0] * x[0] + x[1] * x[1]),
            AnalyticKind::P2 => x[0] + x[1],
            AnalyticKind::P3 => {
                let mut f = T::zero();
                for i in 0..P3_N {
                    let d = x[i] - T::lit(p3_target(i));
                    f += half * d * d + T::lit(0.4) * (T::lit(2.0) * x[i]).cos();
                }
                for i in 0..P3_N - 1 {
                    f += T::lit(0.1) * x[i] * x[i + 1];
                }
                f
            }
        }
    }

    fn c(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        match self.kind {
            AnalyticKind::P1 => vec![x[0] + x[1] - two],
            AnalyticKind::P2 => vec![x[0] * x[0] + x[1] * x[1] - two],
            AnalyticKind::P3 => {
                let sq: T = x.iter().map(|&v| v * v).sum();
                let sum: T = x.iter().copied().sum();
                vec![
                    sq - T::lit(4.0),
                    sum - T::one(),
                    x[0] * x[1] - x[2] + T::lit(0.5) * x[3] * x[3] - x[9] - T::lit(0.2),
                ]
            }
        }
    }

    fn grad(&self, x: &[T]) -> Vec<T> {
        match self.kind {
            AnalyticKind::P1 => x.to_vec(),
            AnalyticKind::P2 => vec![T::one(), T::one()],
            AnalyticKind::P3 => (0..P3_N)
                .map(|i| {
                    let mut g = x[i] - T::lit(p3_target(i)) - T::lit(0.8) * (T::lit(2.0) * x[i]).sin();
                    if i > 0 {
                        g += T::lit(0.1) * x[i - 1];
                    }
                    if i + 1 < P3_N {
                        g += T::lit(0.1) * x[i + 1];
                    }
                    g
                })
                .collect(),
        }
    }

    fn jac(&self, x: &[T]) -> DenseMatrix<T> {
        let two = T::lit(2.0);
        let rows = match self.kind {
            AnalyticKind::P1 => vec![vec![T::one(), T::one()]],
            AnalyticKind::P2 => vec![vec![two * x[0], two * x[1]]],
            AnalyticKind::P3 => {
                let mut r3 = vec![T::zero(); P3_N];
                r3[0] = x[1];
                r3[1] = x[0];
                r3[2] = -T::one();
                r3[3] = x[3];
                r3[9] = -T::one();
                vec![x.iter().map(|&v| two * v).collect(), vec![T::one(); P3_N], r3]
            }
        };
        DenseMatrix::from_rows(&rows).expect("finite Jacobian")
    }

    /// Exact Hessian of `f - lambda^T c`.
    pub fn lagrangian_hessian(&self, x: &[T], lambda: &[T]) -> DenseMatrix<T> {
        let two = T::lit(2.0);
        match self.kind {
            AnalyticKind::P1 => DenseMatrix::identity(2),
            AnalyticKind::P2 => DenseMatrix::identity(2).scale(-two * lambda[0]),
            AnalyticKind::P3 => {
                let mut h = DenseMatrix::zeros(P3_N, P3_N);
                for i in 0..P3_N {
                    h.set(i, i, T::one() - T::lit(1.6) * (two * x[i]).cos() - two * lambda[0]);
                    if i + 1 < P3_N {
                        h.set(i, i + 1, T::lit(0.1));
                        h.set(i + 1, i, T::lit(0.1));
                    }
                }
                let l3 = lambda[2];
                h.set(0, 1, h.get(0, 1) - l3);
                h.set(1, 0, h.get(1, 0) - l3);
                h.set(3, 3, h.get(3, 3) - l3);
                h
            }
        }
    }
}

impl<T: Real> ProblemFunctions<T> for AnalyticProblem<T> {
    fn dim(&self) -> usize {
        match self.kind {
            AnalyticKind::P1 | AnalyticKind::P2 => 2,
            AnalyticKind::P3 => P3_N,
        }
    }

    fn num_constraints(&self) -> usize {
        match self.kind {
            AnalyticKind::P1 | AnalyticKind::P2 => 1,
            AnalyticKind::P3 => 3,
        }
    }

    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError> {
        check_len(self.dim(), x.len())?;
        self.values_calls.fetch_add(1, Ordering::Relaxed);
        Ok((self.f(x), self.c(x)))
    }

    fn derivatives(&self, x: &[T]) -> Result<(Vec<T>, DenseMatrix<T>), EvalError> {
        check_len(self.dim(), x.len())?;
        self.derivative_calls.fetch_add(1, Ordering::Relaxed);
        Ok((self.grad(x), self.jac(x)))
    }

    fn hessian(&self, x: &[T], lambda: &[T]) -> Result<Option<DenseMatrix<T>>, EvalError> {
        check_len(self.dim(), x.len())?;
        check_len(self.num_constraints(), lambda.len())?;
        Ok(Some(self.lagrangian_hessian(x, lambda)))
    }

    fn counts(&self) -> EvalCounts {
        EvalCounts {
            values: self.values_calls.load(Ordering::Relaxed),
            derivatives: self.derivative_calls.load(Ordering::Relaxed),
            ..EvalCounts::default()
        }
    }
}

/// P1, P2 and P3.
pub fn make_analytic_suite<T: Real>() -> Vec<AnalyticProblem<T>> {
    [AnalyticKind::P1, AnalyticKind::P2, AnalyticKind::P3]
        .into_iter()
        .map(AnalyticProblem::new)
        .collect()
}

/// Reference KKT point of P3: dense-factorization SQP from the standard start at 1e-12.
pub fn p3_reference() -> &'static (Vec<f64>, Vec<f64>) {
    static REF: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    REF.get_or_init(|| {
        let problem = AnalyticProblem::<f64> {
            kind: AnalyticKind::P3,
            x0: P3_X0.to_vec(),
            x_star: Vec::new(),
            lambda_star: Vec::new(),
            values_calls: AtomicUsize::new(0),
            derivative_calls: AtomicUsize::new(0),
        };
        let config = SolverConfig {
            tol_f: 1e-12,
            tol_c: 1e-12,
            max_iter: 200,
            hessian: HessianStrategy::ProblemSupplied,
            kkt: KktMethod::Dense,
            ..SolverConfig::default()
        };
        let report = solve_exact(&problem, &P3_X0, &config);
        assert_eq!(report.status, SolveStatus::Converged, "P3 reference solve: {:?}", report.error);
        (report.state.x, report.state.lambda)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::lagrangian_gradient_norm;

    fn fd_check(p: &AnalyticProblem<f64>, x: &[f64]) {
        let (g, j) = p.derivatives(x).unwrap();
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let (fp, cp) = p.values(&xp).unwrap();
            let (fm, cm) = p.values(&xm).unwrap();
            let gfd = (fp - fm) / (2.0 * h);
            assert!((gfd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "{:?} grad {k}", p.kind());
            for i in 0..cp.len() {
                let jfd = (cp[i] - cm[i]) / (2.0 * h);
                assert!((jfd - j.get(i, k)).abs() <= 1e-6 * (1.0 + j.get(i, k).abs()));
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        for p in make_analytic_suite::<f64>() {
            fd_check(&p, p.x0());
            let shifted: Vec<f64> = p.x0().iter().map(|v| v * 0.7 + 0.1).collect();
            fd_check(&p, &shifted);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = AnalyticProblem::<f64>::new(AnalyticKind::P3);
        let x = p.x0().to_vec();
        let lambda = [0.3, -0.2, 0.5];
        let hm = p.lagrangian_hessian(&x, &lambda);
        let lg = |x: &[f64]| {
            let (g, j) = p.derivatives(x).unwrap();
            crate::linalg::sub(&g, &j.tr_matvec(&lambda))
        };
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (lg(&xp), lg(&xm));
            for i in 0..x.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((fd - hm.get(i, k)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn known_optima_satisfy_fonc() {
        for p in make_analytic_suite::<f64>() {
            let (g, j) = p.derivatives(p.x_star()).unwrap();
            let (_, c) = p.values(p.x_star()).unwrap();
            let stat = lagrangian_gradient_norm(&g, &j, p.lambda_star());
            let tol = if p.kind() == AnalyticKind::P3 { 1e-10 } else { 0.0 };
            assert!(stat <= tol, "{}: {stat:e}", p.name());
            assert!(crate::linalg::norm1(&c) <= tol.max(1e-15), "{}", p.name());
        }
    }

    #[test]
    fn counts_track_calls() {
        let p = AnalyticProblem::<f64>::new(AnalyticKind::P1);
        p.values(&[0.0, 0.0]).unwrap();
        p.values(&[1.0, 0.0]).unwrap();
        p.derivatives(&[0.0, 0.0]).unwrap();
        let c = p.counts();
        assert_eq!((c.values, c.derivatives), (2, 1));
        assert!(p.values(&[1.0]).is_err());
    }
}
