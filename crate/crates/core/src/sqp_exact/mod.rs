//! Line-search SQP with an l1 merit function on exact function information.
//!
//! Each iteration solves the QP step system at `x_k`, raises the penalty if the
//! new multiplier demands it, and backtracks along the step until the merit
//! function decreases sufficiently. Multipliers follow the Lagrangian
//! convention `L = f - lambda^T c`.

mod hessian;

pub use hessian::{compute_step, HessianApprox, HessianStrategy, KktMethod, StepResult, CURVATURE_FLOOR};

use log::debug;
use thiserror::Error;

use crate::linalg::{norm1, norm2, norm_inf, step_point, sub, CgOptions, DenseMatrix, LinalgError, RowSpace};
use crate::merit::{
    backtracking_search, merit_directional_derivative, merit_value, LineSearchParams, MeritError,
    PenaltyState,
};
use crate::problem::{lagrangian_gradient_norm, EvalError, ProblemFunctions};
use crate::report::{IterateState, IterationRecord, SolveStatus};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqpError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Merit(#[from] MeritError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

impl SqpError {
    pub fn status(&self) -> SolveStatus {
        match self {
            Self::Linalg(LinalgError::RankDeficient { .. }) => SolveStatus::RankDeficient,
            Self::Linalg(_) => SolveStatus::RankDeficient,
            Self::Merit(MeritError::InvalidParams(_)) | Self::Config(_) => SolveStatus::InvalidConfig,
            Self::Merit(_) => SolveStatus::LineSearchFailure,
            Self::Eval(_) => SolveStatus::EvaluationFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub tol_f: T,
    pub tol_c: T,
    pub max_iter: usize,
    pub line_search: LineSearchParams<T>,
    pub sigma: T,
    pub rho0: T,
    pub hessian: HessianStrategy,
    pub kkt: KktMethod,
    pub cg: CgOptions<T>,
    /// Initial multiplier; the least-squares estimate at `x_0` when absent.
    pub lambda0: Option<Vec<T>>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tol_f: T::lit(1e-6),
            tol_c: T::lit(1e-6),
            max_iter: 100,
            line_search: LineSearchParams::default(),
            sigma: T::lit(0.1),
            rho0: T::one(),
            hessian: HessianStrategy::default(),
            kkt: KktMethod::default(),
            cg: CgOptions::default(),
            lambda0: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), SqpError> {
        self.line_search.validate()?;
        let pos = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(SqpError::Config(format!("{name} must be positive")))
            }
        };
        pos(self.tol_f, "tol_f")?;
        pos(self.tol_c, "tol_c")?;
        pos(self.sigma, "sigma")?;
        pos(self.rho0, "rho0")?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub state: IterateState<T>,
    pub history: Vec<IterationRecord<T>>,
    pub status: SolveStatus,
    pub error: Option<SqpError>,
}

/// Least-squares multiplier `(J J^T)^{-1} J grad_f`.
pub fn initial_multiplier<T: Real>(grad_f: &[T], jac: &DenseMatrix<T>) -> Result<Vec<T>, LinalgError> {
    Ok(RowSpace::new(jac)?.multiplier(grad_f))
}

/// Hessian replacement for the current iterate under `approx`'s strategy.
pub fn hessian_apply<T: Real, P: ProblemFunctions<T> + ?Sized>(
    approx: &HessianApprox<T>,
    problem: &P,
    x: &[T],
    lambda: &[T],
) -> Result<DenseMatrix<T>, EvalError> {
    let supplied = if approx.wants_supplied() {
        problem.hessian(x, lambda)?
    } else {
        None
    };
    Ok(approx.matrix(supplied))
}

struct Point<T> {
    x: Vec<T>,
    f: T,
    c: Vec<T>,
    g: Vec<T>,
    jac: DenseMatrix<T>,
}

/// Runs the exact line-search SQP method from `x0`.
///
/// Stops when `||grad f - c'^T lambda||_2 < tol_f` and `||c||_1 < tol_c`, with
/// `lambda` the most recent multiplier.
pub fn solve_exact<T: Real, P: ProblemFunctions<T> + ?Sized>(
    problem: &P,
    x0: &[T],
    config: &SolverConfig<T>,
) -> SolveReport<T> {
    let mut history = Vec::new();
    let mut state = IterateState {
        x: x0.to_vec(),
        lambda: Vec::new(),
        penalty: PenaltyState::new(config.rho0, config.sigma),
        k: 0,
        counts: problem.counts(),
    };
    let result = run_exact(problem, config, &mut state, &mut history);
    state.counts = problem.counts();
    let (status, error) = match result {
        Ok(status) => (status, None),
        Err(e) => (e.status(), Some(e)),
    };
    SolveReport {
        state,
        history,
        status,
        error,
    }
}

fn run_exact<T: Real, P: ProblemFunctions<T> + ?Sized>(
    problem: &P,
    config: &SolverConfig<T>,
    state: &mut IterateState<T>,
    history: &mut Vec<IterationRecord<T>>,
) -> Result<SolveStatus, SqpError> {
    config.validate()?;
    let n = problem.dim();
    if state.x.len() != n {
        return Err(EvalError::Dimension { expected: n, got: state.x.len() }.into());
    }
    let mut pt = {
        let (f, c) = problem.values(&state.x)?;
        let (g, jac) = problem.derivatives(&state.x)?;
        Point { x: state.x.clone(), f, c, g, jac }
    };
    state.lambda = match &config.lambda0 {
        Some(l) if l.len() == problem.num_constraints() => l.clone(),
        Some(l) => {
            return Err(EvalError::Dimension { expected: problem.num_constraints(), got: l.len() }.into())
        }
        None => initial_multiplier(&pt.g, &pt.jac)?,
    };
    let mut hess = HessianApprox::new(config.hessian, n);

    for k in 0.. {
        state.k = k;
        let stationarity = lagrangian_gradient_norm(&pt.g, &pt.jac, &state.lambda);
        let feasibility = norm1(&pt.c);
        let mut row = IterationRecord {
            k,
            stationarity,
            feasibility,
            true_stationarity: Some(stationarity),
            true_feasibility: Some(feasibility),
            merit: merit_value(pt.f, &pt.c, state.penalty.rho),
            rho: state.penalty.rho,
            alpha: T::zero(),
            step_norm: T::zero(),
            directional_derivative: T::zero(),
            merit_next: T::nan(),
            cg_iterations: 0,
            counts: problem.counts(),
            basis_size: 0,
        };
        debug!("exact k={k} stat={stationarity:e} feas={feasibility:e}");
        if stationarity < config.tol_f && feasibility < config.tol_c {
            history.push(row);
            return Ok(SolveStatus::Converged);
        }
        if k >= config.max_iter {
            history.push(row);
            return Ok(SolveStatus::MaxIter);
        }

        let h = hessian_apply(&hess, problem, &pt.x, &state.lambda)?;
        let step = compute_step(&h, &pt.jac, &pt.g, &pt.c, config.kkt, &config.cg)?;
        let s = step.kkt.step;
        let lambda_next = step.kkt.multiplier;
        state.penalty.update(norm_inf(&lambda_next));
        let rho = state.penalty.rho;
        let phi0 = merit_value(pt.f, &pt.c, rho);
        let d0 = merit_directional_derivative(&pt.g, &s, &pt.c, rho);

        let mut last_trial: Option<(T, Vec<T>)> = None;
        let mut eval_err = None;
        let ls = backtracking_search(
            |alpha| {
                let xt = step_point(&pt.x, alpha, &s);
                match problem.values(&xt) {
                    Ok((f, c)) => {
                        let v = merit_value(f, &c, rho);
                        last_trial = Some((f, c));
                        v
                    }
                    Err(e) => {
                        eval_err = Some(e);
                        last_trial = None;
                        T::infinity()
                    }
                }
            },
            phi0,
            d0,
            &config.line_search,
        );
        let ls = match ls {
            Ok(ls) => ls,
            Err(e) => {
                history.push(row);
                return Err(match eval_err {
                    Some(ev) if matches!(e, MeritError::LineSearchFailure { .. }) => ev.into(),
                    _ => e.into(),
                });
            }
        };
        let (f_new, c_new) = last_trial.expect("accepted trial was evaluated last");
        let x_new = step_point(&pt.x, ls.alpha, &s);
        if x_new == pt.x {
            // the accepted step vanished in rounding; repeating it cannot help
            history.push(row);
            let last_alpha = ls.alpha.to_f64_lossy();
            return Err(MeritError::LineSearchFailure { trials: ls.evals, last_alpha }.into());
        }
        let (g_new, jac_new) = problem.derivatives(&x_new)?;

        row.merit = phi0;
        row.rho = rho;
        row.alpha = ls.alpha;
        row.step_norm = norm2(&s);
        row.directional_derivative = d0;
        row.merit_next = ls.value;
        row.cg_iterations = step.kkt.cg_iterations;
        row.counts = problem.counts();
        history.push(row);

        if hess.strategy() == HessianStrategy::DampedBfgs {
            let dx = sub(&x_new, &pt.x);
            let gl_new = sub(&g_new, &jac_new.tr_matvec(&lambda_next));
            let gl_old = sub(&pt.g, &pt.jac.tr_matvec(&lambda_next));
            hess.record_step(&dx, &sub(&gl_new, &gl_old));
        }
        pt = Point { x: x_new, f: f_new, c: c_new, g: g_new, jac: jac_new };
        state.x = pt.x.clone();
        state.lambda = lambda_next;
        state.counts = problem.counts();
    }
    unreachable!("iteration loop returns")
}
