//! Line-search SQP on models of tunable accuracy.
//!
//! Each outer iteration computes a generalized Cauchy point on the current
//! model (refining it until the point's error estimate fits the budget),
//! continues with a model-only SQP that keeps the error budget as a line-search
//! constraint, and then fixes the accuracy the next model must reach.

use log::debug;
use thiserror::Error;

use crate::linalg::{norm1, norm2, norm_inf, step_point, sub, DenseMatrix, RowSpace};
use crate::merit::{
    backtracking_search, backtracking_search_with, merit_directional_derivative, merit_value,
    sufficient_decrease, MeritError, PenaltyState,
};
use crate::model_framework::{
    cauchy_acceptable, check_relative_errors, error_budget, forcing_value, merit_error, model_merit,
    next_tolerance, omega_bound, BuildRequest, MeritSamples, ModelProvider, ProviderError,
    ToleranceLedger, TunableModel,
};
use crate::problem::{lagrangian_gradient_norm, EvalCounts, EvalError, ProblemFunctions};
use crate::report::{IterateState, IterationRecord, SolveStatus};
use crate::scalar::Real;
use crate::sqp_exact::{compute_step, HessianApprox, HessianStrategy, SolverConfig, SqpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InexactError {
    #[error(transparent)]
    Sqp(#[from] SqpError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("refinement budget exhausted at outer iteration {k} after {refinements} refinements")]
    RefinementBudget { k: usize, refinements: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<EvalError> for InexactError {
    fn from(e: EvalError) -> Self {
        Self::Sqp(SqpError::Eval(e))
    }
}

impl From<MeritError> for InexactError {
    fn from(e: MeritError) -> Self {
        Self::Sqp(SqpError::Merit(e))
    }
}

impl From<crate::linalg::LinalgError> for InexactError {
    fn from(e: crate::linalg::LinalgError) -> Self {
        Self::Sqp(SqpError::Linalg(e))
    }
}

impl InexactError {
    pub fn status(&self) -> SolveStatus {
        match self {
            Self::Sqp(e) => e.status(),
            Self::Provider(ProviderError::Linalg(_)) => SolveStatus::RankDeficient,
            Self::Provider(ProviderError::Eval(_)) => SolveStatus::EvaluationFailure,
            Self::Provider(ProviderError::CannotMeetTolerance(_)) | Self::RefinementBudget { .. } => {
                SolveStatus::RefinementBudgetExhausted
            }
            Self::Invariant(_) => SolveStatus::InvariantViolation,
            Self::Config(_) => SolveStatus::InvalidConfig,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InexactConfig<T> {
    /// Tolerances, line search, penalty and step settings shared with the exact driver.
    pub base: SolverConfig<T>,
    /// Model refinements allowed per outer iteration.
    pub max_refinements: usize,
    /// Extra step halvings tried on a rejected Cauchy point before refining.
    pub extra_backsteps: usize,
    pub max_inner: usize,
    /// Evaluate true FONC residuals at every outer iterate (touches the true problem).
    pub instrument: bool,
}

impl<T: Real> Default for InexactConfig<T> {
    fn default() -> Self {
        Self {
            base: SolverConfig::default(),
            max_refinements: 10,
            extra_backsteps: 5,
            max_inner: 50,
            instrument: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerExit {
    ModelStationary,
    PenaltyRaised,
    ConstraintBound,
    MaxInner,
}

impl InnerExit {
    pub fn name(self) -> &'static str {
        match self {
            Self::ModelStationary => "ModelStationary",
            Self::PenaltyRaised => "PenaltyRaised",
            Self::ConstraintBound => "ConstraintBound",
            Self::MaxInner => "MaxInner",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyResult<T> {
    pub x_c: Vec<T>,
    pub s0: Vec<T>,
    pub alpha0: T,
    pub lambda_next: Vec<T>,
    pub penalty: PenaltyState<T>,
    pub refinements_used: usize,
    pub extra_backsteps_used: usize,
    /// `psi_k(x_k; rho_k)`
    pub psi_xk: T,
    /// `psi_k(x_k^C; rho_k)`
    pub psi_xc: T,
    /// `e_k(x_k^C; rho_k)^omega`
    pub e_xc_pow: T,
    pub directional_derivative: T,
    pub cg_iterations: usize,
    /// Model stationarity and feasibility at `x_k` for the final model.
    pub stationarity: T,
    pub feasibility: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerRecord<T> {
    pub j: usize,
    pub stationarity: T,
    pub feasibility: T,
    pub rho: T,
    pub alpha: T,
    pub merit: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubminResult<T> {
    pub x_next: Vec<T>,
    pub lambda: Vec<T>,
    pub exit: InnerExit,
    pub inner_records: Vec<InnerRecord<T>>,
}

/// Bookkeeping of one completed outer iteration, enough to re-check every
/// acceptance condition after the run.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord<T> {
    pub k: usize,
    pub r_k: T,
    pub tau_k: T,
    pub tau_next: T,
    pub rho_k: T,
    pub psi_xk: T,
    pub psi_xc: T,
    /// `psi_k(x_{k+1}; rho_k)`
    pub psi_next: T,
    pub e_xc_pow: T,
    /// `e_k(x_{k+1}; rho_k)^omega`
    pub e_next_pow: T,
    /// `psi_{k+1}(x_{k+1}; rho_k)` for the freshly built next model.
    pub psi_new_model: T,
    /// `e_{k+1}(x_{k+1}; rho_k)^omega`
    pub e_new_model_pow: T,
    /// True merit `phi(x_{k+1}; rho_k)` when instrumented.
    pub true_merit_next: Option<T>,
    /// True merit `phi(x_k; rho_k)` when instrumented.
    pub true_merit_xk: Option<T>,
    pub refinements: usize,
    pub extra_backsteps: usize,
    pub inner_exit: InnerExit,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct InexactReport<T> {
    pub state: IterateState<T>,
    /// One row per outer iterate, including the final one.
    pub history: Vec<IterationRecord<T>>,
    /// One row per completed outer iteration.
    pub outer: Vec<OuterRecord<T>>,
    pub status: SolveStatus,
    pub error: Option<InexactError>,
    pub max_basis_size: usize,
}

struct ModelPoint<T> {
    m: T,
    h: Vec<T>,
    g: Vec<T>,
    jac: DenseMatrix<T>,
}

fn eval_model<T: Real, M: TunableModel<T> + ?Sized>(model: &M, x: &[T]) -> Result<ModelPoint<T>, EvalError> {
    let (m, h) = model.values(x)?;
    let (g, jac) = model.derivatives(x)?;
    Ok(ModelPoint { m, h, g, jac })
}

fn model_hessian<T: Real, M: TunableModel<T> + ?Sized>(
    approx: &HessianApprox<T>,
    model: &M,
    x: &[T],
    lambda: &[T],
) -> Result<DenseMatrix<T>, EvalError> {
    let supplied = if approx.wants_supplied() { model.hessian(x, lambda)? } else { None };
    Ok(approx.matrix(supplied))
}

/// `psi_k(x; rho)` with evaluation failures mapped to `+inf` so the line search rejects them.
fn merit_or_inf<T: Real, M: TunableModel<T> + ?Sized>(model: &M, x: &[T], rho: T) -> T {
    model_merit(model, x, rho).unwrap_or(T::infinity())
}

fn error_pow<T: Real, M: TunableModel<T> + ?Sized>(model: &M, x: &[T], rho: T, omega: T) -> Result<T, EvalError> {
    Ok(omega_bound(merit_error(model, x, rho)?, omega))
}

/// Refines `model` at its build point until `e(x; rho) <= tau` and the relative-error gates hold.
#[allow(clippy::too_many_arguments)]
fn ensure_model<T, P, Pr>(
    provider: &mut Pr,
    problem: &P,
    mut model: Pr::Model,
    x: &[T],
    request: &BuildRequest<'_, T>,
    k: usize,
    max_refinements: usize,
    refinements: &mut usize,
) -> Result<Pr::Model, InexactError>
where
    T: Real,
    P: ProblemFunctions<T> + ?Sized,
    Pr: ModelProvider<T>,
{
    loop {
        let e = merit_error(&model, x, request.rho)?;
        let gates = check_relative_errors(&model, problem, x, request.lambda, &request.thresholds)?;
        if e <= request.tau && gates.pass {
            return Ok(model);
        }
        debug!("model at k={k} fails: e={e:e} tau={:e} ratios={:?}", request.tau, gates.ratios);
        if *refinements >= max_refinements {
            return Err(InexactError::RefinementBudget { k, refinements: *refinements });
        }
        model = provider.refine(&model, x, request)?;
        *refinements += 1;
    }
}

/// Generalized Cauchy point at `state.x`, refining the model as needed.
/// Returns the (possibly refined) model together with the accepted point.
#[allow(clippy::too_many_arguments)]
pub fn compute_cauchy_point<T, P, Pr>(
    provider: &mut Pr,
    problem: &P,
    ledger: &ToleranceLedger<T>,
    mut model: Pr::Model,
    state: &IterateState<T>,
    r_k: T,
    hess: &HessianApprox<T>,
    config: &InexactConfig<T>,
) -> Result<(Pr::Model, CauchyResult<T>), InexactError>
where
    T: Real,
    P: ProblemFunctions<T> + ?Sized,
    Pr: ModelProvider<T>,
{
    let base = &config.base;
    let x = &state.x;
    let mut refinements = 0;
    loop {
        let pt = eval_model(&model, x)?;
        let h = model_hessian(hess, &model, x, &state.lambda)?;
        let step = compute_step(&h, &pt.jac, &pt.g, &pt.h, base.kkt, &base.cg).map_err(SqpError::from)?;
        let s = step.kkt.step;
        let mut penalty = state.penalty.clone();
        penalty.update(norm_inf(&step.kkt.multiplier));
        let rho = penalty.rho;
        let psi0 = merit_value(pt.m, &pt.h, rho);
        let d0 = merit_directional_derivative(&pt.g, &s, &pt.h, rho);
        let ls = backtracking_search(|a| merit_or_inf(&model, &step_point(x, a, &s), rho), psi0, d0, &base.line_search)?;

        let mut alpha = ls.alpha;
        let mut psi_c = ls.value;
        let mut e_c = error_pow(&model, &step_point(x, alpha, &s), rho, ledger.omega)?;
        let mut accepted = cauchy_acceptable(ledger, e_c, r_k, psi0 - psi_c);
        let mut backsteps = 0;
        while !accepted && backsteps < config.extra_backsteps {
            backsteps += 1;
            let a = alpha * base.line_search.beta1;
            let xt = step_point(x, a, &s);
            let psi_t = merit_or_inf(&model, &xt, rho);
            if !sufficient_decrease(psi_t, psi0, d0, a, base.line_search.c1) {
                continue;
            }
            let e_t = error_pow(&model, &xt, rho, ledger.omega)?;
            alpha = a;
            if cauchy_acceptable(ledger, e_t, r_k, psi0 - psi_t) {
                psi_c = psi_t;
                e_c = e_t;
                accepted = true;
            }
        }
        if !accepted {
            // restore the line-search point as the refinement location
            alpha = ls.alpha;
        }
        let x_c = step_point(x, alpha, &s);
        if accepted {
            let stationarity = lagrangian_gradient_norm(&pt.g, &pt.jac, &state.lambda);
            return Ok((
                model,
                CauchyResult {
                    x_c,
                    s0: s,
                    alpha0: alpha,
                    lambda_next: step.kkt.multiplier,
                    penalty,
                    refinements_used: refinements,
                    extra_backsteps_used: backsteps,
                    psi_xk: psi0,
                    psi_xc: psi_c,
                    e_xc_pow: e_c,
                    directional_derivative: d0,
                    cg_iterations: step.kkt.cg_iterations,
                    stationarity,
                    feasibility: norm1(&pt.h),
                },
            ));
        }
        debug!("cauchy point rejected at k={}: e^w={e_c:e} decrease={:e}", state.k, psi0 - psi_c);
        if refinements >= config.max_refinements {
            return Err(InexactError::RefinementBudget { k: state.k, refinements });
        }
        let request = BuildRequest {
            tau: ledger.build_tolerance(ledger.tau_current),
            rho,
            lambda: Some(&state.lambda),
            thresholds: ledger.thresholds,
        };
        model = provider.refine(&model, &x_c, &request)?;
        refinements += 1;
        model = ensure_model(provider, problem, model, x, &request, state.k, config.max_refinements, &mut refinements)?;
    }
}

/// Model-only SQP started at the Cauchy point with the error budget enforced
/// in the line search.
pub fn solve_submin<T: Real, M: TunableModel<T> + ?Sized>(
    model: &M,
    ledger: &ToleranceLedger<T>,
    cauchy: &CauchyResult<T>,
    r_k: T,
    hess: &mut HessianApprox<T>,
    config: &InexactConfig<T>,
) -> Result<SubminResult<T>, InexactError> {
    let base = &config.base;
    let budget = error_budget(ledger, r_k, cauchy.psi_xk - cauchy.psi_xc);
    let rho_k = cauchy.penalty.rho;
    let mut penalty = cauchy.penalty.clone();
    let mut x = cauchy.x_c.clone();
    let mut lambda = cauchy.lambda_next.clone();
    let mut records = Vec::new();
    let within_budget = |xt: &[T]| match error_pow(model, xt, rho_k, ledger.omega) {
        Ok(e) => e <= budget,
        Err(_) => false,
    };

    let mut pt = eval_model(model, &x)?;
    for j in 0..config.max_inner {
        let stationarity = lagrangian_gradient_norm(&pt.g, &pt.jac, &lambda);
        let feasibility = norm1(&pt.h);
        let mut rec = InnerRecord {
            j,
            stationarity,
            feasibility,
            rho: penalty.rho,
            alpha: T::zero(),
            merit: merit_value(pt.m, &pt.h, penalty.rho),
        };
        if stationarity < base.tol_f && feasibility < base.tol_c {
            records.push(rec);
            return Ok(SubminResult { x_next: x, lambda, exit: InnerExit::ModelStationary, inner_records: records });
        }
        let h = model_hessian(hess, model, &x, &lambda)?;
        let step = compute_step(&h, &pt.jac, &pt.g, &pt.h, base.kkt, &base.cg).map_err(SqpError::from)?;
        let s = step.kkt.step;
        penalty.update(norm_inf(&step.kkt.multiplier));
        let rho_j = penalty.rho;
        let psi0 = merit_value(pt.m, &pt.h, rho_j);
        let d0 = merit_directional_derivative(&pt.g, &s, &pt.h, rho_j);
        let ls = backtracking_search_with(
            |a| merit_or_inf(model, &step_point(&x, a, &s), rho_j),
            psi0,
            d0,
            &base.line_search,
            |a, _| within_budget(&step_point(&x, a, &s)),
        );
        // a step lost entirely to rounding makes no progress either
        let ls = match ls {
            Ok(ls) if step_point(&x, ls.alpha, &s) != x => ls,
            _ => {
                records.push(rec);
                return Ok(SubminResult { x_next: x, lambda, exit: InnerExit::ConstraintBound, inner_records: records });
            }
        };
        let x_new = step_point(&x, ls.alpha, &s);
        rec.rho = rho_j;
        rec.alpha = ls.alpha;
        rec.merit = psi0;
        records.push(rec);
        if rho_j > rho_k && merit_or_inf(model, &x_new, rho_k) > cauchy.psi_xc {
            return Ok(SubminResult { x_next: x, lambda, exit: InnerExit::PenaltyRaised, inner_records: records });
        }
        let lambda_new = step.kkt.multiplier;
        let pt_new = eval_model(model, &x_new)?;
        if hess.strategy() == HessianStrategy::DampedBfgs {
            let gl_new = sub(&pt_new.g, &pt_new.jac.tr_matvec(&lambda_new));
            let gl_old = sub(&pt.g, &pt.jac.tr_matvec(&lambda_new));
            hess.record_step(&sub(&x_new, &x), &sub(&gl_new, &gl_old));
        }
        x = x_new;
        lambda = lambda_new;
        pt = pt_new;
    }
    Ok(SubminResult { x_next: x, lambda, exit: InnerExit::MaxInner, inner_records: records })
}

fn combined_counts<T: Real, P: ProblemFunctions<T> + ?Sized, Pr: ModelProvider<T>>(problem: &P, provider: &Pr) -> EvalCounts {
    let mut c = problem.counts();
    c += provider.counts();
    c
}

/// Runs the model-based SQP method from `x0`.
///
/// The outer stopping test uses model quantities only:
/// `||grad m_k - h_k'^T lambda||_2 < tol_f` and `||h_k||_1 < tol_c`.
pub fn solve_inexact<T, P, Pr>(
    provider: &mut Pr,
    problem: &P,
    x0: &[T],
    ledger: &ToleranceLedger<T>,
    config: &InexactConfig<T>,
) -> InexactReport<T>
where
    T: Real,
    P: ProblemFunctions<T> + ?Sized,
    Pr: ModelProvider<T>,
{
    let mut state = IterateState {
        x: x0.to_vec(),
        lambda: Vec::new(),
        penalty: PenaltyState::new(config.base.rho0, config.base.sigma),
        k: 0,
        counts: combined_counts(problem, provider),
    };
    let mut history = Vec::new();
    let mut outer = Vec::new();
    let mut max_basis = 0;
    let mut ledger = ledger.clone();
    let result = run_inexact(provider, problem, config, &mut ledger, &mut state, &mut history, &mut outer, &mut max_basis);
    state.counts = combined_counts(problem, provider);
    let (status, error) = match result {
        Ok(s) => (s, None),
        Err(e) => (e.status(), Some(e)),
    };
    InexactReport { state, history, outer, status, error, max_basis_size: max_basis }
}

fn true_fonc<T: Real, P: ProblemFunctions<T> + ?Sized>(problem: &P, x: &[T], lambda: &[T]) -> Result<(T, T, T, Vec<T>), EvalError> {
    let (f, c) = problem.values(x)?;
    let (g, j) = problem.derivatives(x)?;
    Ok((lagrangian_gradient_norm(&g, &j, lambda), norm1(&c), f, c))
}

#[allow(clippy::too_many_arguments)]
fn run_inexact<T, P, Pr>(
    provider: &mut Pr,
    problem: &P,
    config: &InexactConfig<T>,
    ledger: &mut ToleranceLedger<T>,
    state: &mut IterateState<T>,
    history: &mut Vec<IterationRecord<T>>,
    outer: &mut Vec<OuterRecord<T>>,
    max_basis: &mut usize,
) -> Result<SolveStatus, InexactError>
where
    T: Real,
    P: ProblemFunctions<T> + ?Sized,
    Pr: ModelProvider<T>,
{
    let base = &config.base;
    base.validate()?;
    ledger.validate().map_err(InexactError::Config)?;
    let n = problem.dim();
    if state.x.len() != n {
        return Err(EvalError::Dimension { expected: n, got: state.x.len() }.into());
    }
    if let Some(l) = &base.lambda0 {
        if l.len() != problem.num_constraints() {
            return Err(EvalError::Dimension { expected: problem.num_constraints(), got: l.len() }.into());
        }
    }

    let request = BuildRequest {
        tau: ledger.build_tolerance(ledger.tau_current),
        rho: state.penalty.rho,
        lambda: base.lambda0.as_deref(),
        thresholds: ledger.thresholds,
    };
    let mut model = provider.build(&state.x, &request)?;
    let mut refinements = 0;
    model = ensure_model(provider, problem, model, &state.x, &request, 0, config.max_refinements, &mut refinements)?;
    state.lambda = match &base.lambda0 {
        Some(l) => l.clone(),
        None => {
            let (g, jac) = model.derivatives(&state.x)?;
            RowSpace::new(&jac).map_err(SqpError::from)?.multiplier(&g)
        }
    };
    let mut hess = HessianApprox::new(base.hessian, n);

    for k in 0.. {
        state.k = k;
        *max_basis = (*max_basis).max(model.basis_size());
        let pt = eval_model(&model, &state.x)?;
        let stationarity = lagrangian_gradient_norm(&pt.g, &pt.jac, &state.lambda);
        let feasibility = norm1(&pt.h);
        let (true_stat, true_feas, true_f, true_c) = if config.instrument {
            let (s, f, fv, c) = true_fonc(problem, &state.x, &state.lambda)?;
            (Some(s), Some(f), Some(fv), Some(c))
        } else {
            (None, None, None, None)
        };
        let mut row = IterationRecord {
            k,
            stationarity,
            feasibility,
            true_stationarity: true_stat,
            true_feasibility: true_feas,
            merit: merit_value(pt.m, &pt.h, state.penalty.rho),
            rho: state.penalty.rho,
            alpha: T::zero(),
            step_norm: T::zero(),
            directional_derivative: T::zero(),
            merit_next: T::nan(),
            cg_iterations: 0,
            counts: combined_counts(problem, provider),
            basis_size: model.basis_size(),
        };
        debug!("inexact k={k} stat={stationarity:e} feas={feasibility:e} tau={:e}", ledger.tau_current);
        if stationarity < base.tol_f && feasibility < base.tol_c {
            history.push(row);
            return Ok(SolveStatus::Converged);
        }
        if k >= base.max_iter {
            history.push(row);
            return Ok(SolveStatus::MaxIter);
        }

        let r_k = forcing_value(ledger, k);
        let (m, cauchy) = match compute_cauchy_point(provider, problem, ledger, model, state, r_k, &hess, config) {
            Ok(v) => v,
            Err(e) => {
                history.push(row);
                return Err(e);
            }
        };
        model = m;
        *max_basis = (*max_basis).max(model.basis_size());
        let sub_res = solve_submin(&model, ledger, &cauchy, r_k, &mut hess, config)?;
        let rho_k = cauchy.penalty.rho;
        let x_next = sub_res.x_next;

        let psi = MeritSamples {
            at_xk: cauchy.psi_xk,
            at_xc: cauchy.psi_xc,
            at_next: model_merit(&model, &x_next, rho_k)?,
        };
        let e_next_pow = error_pow(&model, &x_next, rho_k, ledger.omega)?;
        let budget = error_budget(ledger, r_k, psi.at_xk - psi.at_xc);
        if psi.at_next > psi.at_xc {
            return Err(InexactError::Invariant(format!(
                "model merit rose above the Cauchy value at k={k} ({:e} > {:e})",
                psi.at_next, psi.at_xc
            )));
        }
        if e_next_pow > budget {
            return Err(InexactError::Invariant(format!(
                "error budget exceeded at k={k} ({e_next_pow:e} > {budget:e})"
            )));
        }
        let tau_next = next_tolerance(ledger, &psi, e_next_pow, r_k)
            .map_err(|e| InexactError::Invariant(format!("k={k}: {e}")))?;

        let request = BuildRequest {
            tau: ledger.build_tolerance(tau_next),
            rho: rho_k,
            lambda: Some(&sub_res.lambda),
            thresholds: ledger.thresholds,
        };
        let next_model = provider.build(&x_next, &request)?;
        let mut next_refinements = 0;
        let next_model = ensure_model(
            provider,
            problem,
            next_model,
            &x_next,
            &request,
            k + 1,
            config.max_refinements,
            &mut next_refinements,
        )?;
        let psi_new_model = model_merit(&next_model, &x_next, rho_k)?;
        let e_new_model_pow = error_pow(&next_model, &x_next, rho_k, ledger.omega)?;
        let (true_merit_next, true_merit_xk) = if config.instrument {
            let (f1, c1) = problem.values(&x_next)?;
            (
                Some(merit_value(f1, &c1, rho_k)),
                true_f.zip(true_c.as_ref()).map(|(f, c)| merit_value(f, c, rho_k)),
            )
        } else {
            (None, None)
        };

        row.stationarity = cauchy.stationarity;
        row.feasibility = cauchy.feasibility;
        row.merit = cauchy.psi_xk;
        row.rho = rho_k;
        row.alpha = cauchy.alpha0;
        row.step_norm = norm2(&sub(&x_next, &state.x));
        row.directional_derivative = cauchy.directional_derivative;
        row.merit_next = psi.at_next;
        row.cg_iterations = cauchy.cg_iterations;
        row.counts = combined_counts(problem, provider);
        row.basis_size = model.basis_size();
        history.push(row);
        outer.push(OuterRecord {
            k,
            r_k,
            tau_k: ledger.tau_current,
            tau_next,
            rho_k,
            psi_xk: psi.at_xk,
            psi_xc: psi.at_xc,
            psi_next: psi.at_next,
            e_xc_pow: cauchy.e_xc_pow,
            e_next_pow,
            psi_new_model,
            e_new_model_pow,
            true_merit_next,
            true_merit_xk,
            refinements: cauchy.refinements_used,
            extra_backsteps: cauchy.extra_backsteps_used,
            inner_exit: sub_res.exit,
            inner_iterations: sub_res.inner_records.len(),
        });

        state.x = x_next;
        state.lambda = sub_res.lambda;
        state.penalty = cauchy.penalty;
        state.counts = combined_counts(problem, provider);
        ledger.tau_current = tau_next;
        model = next_model;
    }
    unreachable!("outer loop returns")
}

#[cfg(test)]
mod tests;
