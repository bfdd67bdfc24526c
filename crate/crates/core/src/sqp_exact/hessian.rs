use crate::linalg::{
    axpy, dense_kkt_oracle, dot, norm2, solve_kkt_projected, CgOptions, DenseMatrix, KktSolution,
    LinalgError, RowSpace, ShiftedOperator,
};
use crate::scalar::Real;

/// Lower bound enforced on sampled Rayleigh quotients of the step Hessian.
pub const CURVATURE_FLOOR: f64 = 1e-8;

const MAX_SHIFT_ROUNDS: usize = 60;

/// Source of the symmetric matrix that replaces the Lagrangian Hessian.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum HessianStrategy {
    Identity,
    /// Powell-damped BFGS, initialized at the identity.
    DampedBfgs,
    /// Matrix supplied by the problem or model (exact or Gauss-Newton-like),
    /// shifted as needed to stay positive definite on the null space.
    #[default]
    ProblemSupplied,
}

/// How the step system is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum KktMethod {
    /// Nullspace projection plus conjugate gradients.
    #[default]
    Projected,
    /// Direct factorization of the full KKT matrix.
    Dense,
}

#[derive(Debug, Clone)]
pub struct HessianApprox<T> {
    strategy: HessianStrategy,
    bfgs: DenseMatrix<T>,
    updates: usize,
}

impl<T: Real> HessianApprox<T> {
    pub fn new(strategy: HessianStrategy, n: usize) -> Self {
        Self {
            strategy,
            bfgs: DenseMatrix::identity(n),
            updates: 0,
        }
    }

    pub fn strategy(&self) -> HessianStrategy {
        self.strategy
    }

    pub fn wants_supplied(&self) -> bool {
        self.strategy == HessianStrategy::ProblemSupplied
    }

    /// Matrix for the current iteration. A missing or malformed supplied
    /// matrix falls back to the identity.
    pub fn matrix(&self, supplied: Option<DenseMatrix<T>>) -> DenseMatrix<T> {
        let n = self.bfgs.rows();
        match self.strategy {
            HessianStrategy::Identity => DenseMatrix::identity(n),
            HessianStrategy::DampedBfgs => self.bfgs.clone(),
            HessianStrategy::ProblemSupplied => match supplied {
                Some(h)
                    if h.rows() == n
                        && h.cols() == n
                        && h.is_symmetric(T::lit(1e-10) * (T::one() + h.max_abs())) =>
                {
                    h
                }
                _ => DenseMatrix::identity(n),
            },
        }
    }

    /// Damped BFGS update with step `s` and Lagrangian-gradient change `y`.
    pub fn record_step(&mut self, s: &[T], y: &[T]) {
        if self.strategy != HessianStrategy::DampedBfgs {
            return;
        }
        let bs = self.bfgs.matvec(s);
        let sbs = dot(s, &bs);
        if !(sbs > T::epsilon() * dot(s, s)) || !sbs.is_finite() {
            return;
        }
        let sy = dot(s, y);
        let theta = if sy >= T::lit(0.2) * sbs {
            T::one()
        } else {
            T::lit(0.8) * sbs / (sbs - sy)
        };
        let mut r: Vec<T> = y.iter().map(|&v| theta * v).collect();
        axpy(T::one() - theta, &bs, &mut r);
        let sr = dot(s, &r);
        if !(sr > T::zero()) {
            return;
        }
        let n = s.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.bfgs.get(i, j) - bs[i] * bs[j] / sbs + r[i] * r[j] / sr;
                self.bfgs.set(i, j, v);
            }
        }
        self.updates += 1;
    }

    pub fn bfgs_updates(&self) -> usize {
        self.updates
    }
}

#[derive(Debug, Clone)]
pub struct StepResult<T> {
    pub kkt: KktSolution<T>,
    /// Levenberg shift `mu` actually used: the step solves with `H + mu I`.
    pub shift: T,
}

/// Solves the step system with `H + mu I`, raising `mu` from zero until every
/// sampled curvature is at least [`CURVATURE_FLOOR`].
pub fn compute_step<T: Real>(
    h: &DenseMatrix<T>,
    j: &DenseMatrix<T>,
    g: &[T],
    c: &[T],
    method: KktMethod,
    cg: &CgOptions<T>,
) -> Result<StepResult<T>, LinalgError> {
    let floor = T::lit(CURVATURE_FLOOR);
    let mut shift = T::zero();
    let mut last = None;
    for _ in 0..MAX_SHIFT_ROUNDS {
        let (sol, curvature) = match method {
            KktMethod::Projected => {
                let op = ShiftedOperator { inner: h, shift };
                let opts = CgOptions {
                    curvature_floor: floor,
                    ..*cg
                };
                let sol = solve_kkt_projected(&op, j, g, c, &opts)?;
                let curv = if sol.indefinite { sol.min_curvature } else { T::infinity() };
                (sol, curv)
            }
            KktMethod::Dense => {
                let mut hs = h.clone();
                hs.add_diagonal(shift);
                match dense_kkt_oracle(&hs, j, g, c) {
                    Ok(sol) => {
                        // sample the curvature along the nullspace part of the step
                        let z = RowSpace::new(j)?.project(&sol.step);
                        let zz = dot(&z, &z);
                        let curv = if zz > T::epsilon() * T::epsilon() * (T::one() + dot(&sol.step, &sol.step)) {
                            dot(&z, &hs.matvec(&z)) / zz
                        } else {
                            T::infinity()
                        };
                        (sol, curv)
                    }
                    Err(LinalgError::SingularKkt) => (
                        KktSolution {
                            step: vec![T::zero(); g.len()],
                            multiplier: vec![T::zero(); c.len()],
                            cg_iterations: 0,
                            residual_norm: T::infinity(),
                            indefinite: true,
                            min_curvature: T::zero(),
                        },
                        T::zero(),
                    ),
                    Err(e) => return Err(e),
                }
            }
        };
        if curvature >= floor {
            return Ok(StepResult { kkt: sol, shift });
        }
        last = Some(sol);
        let deficit = floor - curvature;
        shift = (shift * T::lit(2.0)).max(deficit * T::lit(2.0)).max(floor);
        if !shift.is_finite() {
            break;
        }
    }
    // unreachable in practice: a shift above ||H|| makes every curvature positive
    let kkt = last.expect("at least one round");
    if norm2(&kkt.step).is_finite() && kkt.residual_norm.is_finite() {
        Ok(StepResult { kkt, shift })
    } else {
        Err(LinalgError::SingularKkt)
    }
}
