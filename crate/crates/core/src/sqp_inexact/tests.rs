use std::sync::Arc;

use super::*;
use crate::model_framework::RelThresholds;
use crate::providers::analytic::{make_analytic_suite, AnalyticKind, AnalyticProblem};
use crate::providers::exact_wrapper::exact_wrapper;
use crate::providers::synthetic::synthetic_provider;
use crate::sqp_exact::solve_exact;

fn p(kind: AnalyticKind) -> Arc<AnalyticProblem<f64>> {
    Arc::new(AnalyticProblem::new(kind))
}

#[test]
fn exact_wrapper_degenerates_to_exact_sqp() {
    let prob = p(AnalyticKind::P1);
    let mut prov = exact_wrapper(Arc::clone(&prob));
    let ledger = ToleranceLedger::default();
    let rep = solve_inexact(&mut prov, prob.as_ref(), prob.x0(), &ledger, &InexactConfig::default());
    assert_eq!(rep.status, SolveStatus::Converged, "{:?}", rep.error);
    let exact = solve_exact(prob.as_ref(), prob.x0(), &SolverConfig::default());
    for (a, b) in rep.state.x.iter().zip(&exact.state.x) {
        assert!((a - b).abs() <= 1e-10);
    }
    for o in &rep.outer {
        assert_eq!(o.tau_next, o.r_k);
        assert_eq!(o.refinements, 0);
    }
}

#[test]
fn stationary_start_stops_before_any_step() {
    let prob = p(AnalyticKind::P1);
    let mut prov = exact_wrapper(Arc::clone(&prob));
    let rep = solve_inexact(&mut prov, prob.as_ref(), &[1.0, 1.0], &ToleranceLedger::default(), &InexactConfig::default());
    assert_eq!(rep.status, SolveStatus::Converged);
    assert!(rep.outer.is_empty());
    assert_eq!(rep.history.len(), 1);
}

#[test]
fn synthetic_provider_converges_on_suite() {
    for prob in make_analytic_suite::<f64>() {
        let prob = Arc::new(prob);
        let mut prov = synthetic_provider(Arc::clone(&prob), 0.5, 17).unwrap();
        let cfg = InexactConfig { instrument: true, ..InexactConfig::default() };
        let rep = solve_inexact(&mut prov, prob.as_ref(), prob.x0(), &ToleranceLedger::default(), &cfg);
        assert_eq!(rep.status, SolveStatus::Converged, "{}: {:?}", prob.name(), rep.error);
        let dist: f64 = rep.state.x.iter().zip(prob.x_star()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dist < 1e-5, "{}: {dist:e}", prob.name());
    }
}

#[test]
fn refinement_loop_fires_when_cauchy_error_is_too_large() {
    // a loose initial tolerance makes the first Cauchy point fail its budget
    let prob = p(AnalyticKind::P2);
    let mut prov = synthetic_provider(Arc::clone(&prob), 0.5, 4).unwrap();
    let ledger = ToleranceLedger { tau_current: 0.5, r0: 1e-3, ..ToleranceLedger::default() };
    let rep = solve_inexact(&mut prov, prob.as_ref(), prob.x0(), &ledger, &InexactConfig::default());
    assert_eq!(rep.status, SolveStatus::Converged, "{:?}", rep.error);
    assert!(rep.outer[0].refinements >= 1);
}

#[test]
fn refinement_budget_is_enforced() {
    let prob = p(AnalyticKind::P2);
    let mut prov = synthetic_provider(Arc::clone(&prob), 0.9, 4).unwrap();
    let ledger = ToleranceLedger { tau_current: 0.5, r0: 1e-8, ..ToleranceLedger::default() };
    let cfg = InexactConfig { max_refinements: 0, extra_backsteps: 0, ..InexactConfig::default() };
    let rep = solve_inexact(&mut prov, prob.as_ref(), prob.x0(), &ledger, &cfg);
    assert_eq!(rep.status, SolveStatus::RefinementBudgetExhausted);
    assert!(matches!(rep.error, Some(InexactError::RefinementBudget { k: 0, .. })));
}

#[test]
fn submin_reaches_exact_subproblem_solution_on_quadratic() {
    let prob = p(AnalyticKind::P1);
    let mut prov = exact_wrapper(Arc::clone(&prob));
    let ledger = ToleranceLedger::default();
    let cfg = InexactConfig::default();
    let req = BuildRequest { tau: 1.0, rho: 1.0, lambda: None, thresholds: RelThresholds::default() };
    let model = prov.build(&[0.0, 3.0], &req).unwrap();
    let state = IterateState {
        x: vec![0.0, 3.0],
        lambda: vec![0.0],
        penalty: PenaltyState::new(1.0, 0.1),
        k: 0,
        counts: EvalCounts::default(),
    };
    let hess = HessianApprox::new(HessianStrategy::ProblemSupplied, 2);
    let (model, cauchy) = compute_cauchy_point(&mut prov, prob.as_ref(), &ledger, model, &state, 1.0, &hess, &cfg).unwrap();
    let mut hess = hess;
    let res = solve_submin(&model, &ledger, &cauchy, 1.0, &mut hess, &cfg).unwrap();
    assert_eq!(res.exit, InnerExit::ModelStationary);
    assert!((res.x_next[0] - 1.0).abs() < 1e-12 && (res.x_next[1] - 1.0).abs() < 1e-12);
    assert!((res.lambda[0] - 1.0).abs() < 1e-12);
}

/// Exact functions with an error that is smallest at `anchor` and grows steeply away from it.
struct Pinned {
    inner: crate::providers::exact_wrapper::ExactModel<f64, AnalyticProblem<f64>>,
    anchor: Vec<f64>,
    base: f64,
}

impl TunableModel<f64> for Pinned {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }
    fn values(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        self.inner.values(x)
    }
    fn derivatives(&self, x: &[f64]) -> Result<(Vec<f64>, DenseMatrix<f64>), EvalError> {
        self.inner.derivatives(x)
    }
    fn error_bounds(&self, x: &[f64]) -> Result<(f64, f64), EvalError> {
        Ok((self.base * (1.0 + 1e6 * norm2(&sub(x, &self.anchor))), 0.0))
    }
    fn build_point(&self) -> &[f64] {
        &self.anchor
    }
    fn refinement_level(&self) -> usize {
        0
    }
}

fn cauchy_at(model: &dyn TunableModel<f64>, x_c: Vec<f64>, lambda: Vec<f64>, penalty: PenaltyState<f64>) -> CauchyResult<f64> {
    let psi_xc = model_merit(model, &x_c, penalty.rho).unwrap();
    CauchyResult {
        x_c,
        s0: vec![],
        alpha0: 1.0,
        lambda_next: lambda,
        penalty,
        refinements_used: 0,
        extra_backsteps_used: 0,
        psi_xk: psi_xc + 1.0,
        psi_xc,
        e_xc_pow: 0.0,
        directional_derivative: -1.0,
        cg_iterations: 0,
        stationarity: 1.0,
        feasibility: 1.0,
    }
}

#[test]
fn tight_budget_gives_constraint_bound_at_cauchy_point() {
    let prob = p(AnalyticKind::P1);
    let mut prov = exact_wrapper(Arc::clone(&prob));
    let req = BuildRequest { tau: 1.0, rho: 1.0, lambda: None, thresholds: RelThresholds::default() };
    let x_c = vec![0.5, 0.2];
    let ledger = ToleranceLedger::default();
    // the Cauchy error sits exactly on the budget
    let base = ledger.build_tolerance(1e-3);
    let model = Pinned { inner: prov.build(&x_c, &req).unwrap(), anchor: x_c.clone(), base };
    let cauchy = cauchy_at(&model, x_c.clone(), vec![0.0], PenaltyState::new(1.0, 0.1));
    let mut hess = HessianApprox::new(HessianStrategy::ProblemSupplied, 2);
    let res = solve_submin(&model, &ledger, &cauchy, 1e-3, &mut hess, &InexactConfig::default()).unwrap();
    assert_eq!(res.exit, InnerExit::ConstraintBound);
    assert_eq!(res.x_next, x_c);
    assert_eq!(res.inner_records.len(), 1);
}

#[test]
fn raised_penalty_with_merit_increase_stops_inner_loop() {
    let prob = p(AnalyticKind::P2);
    let mut prov = exact_wrapper(Arc::clone(&prob));
    let req = BuildRequest { tau: 1.0, rho: 1.0, lambda: None, thresholds: RelThresholds::default() };
    let x_c = vec![-2.0, -1.0];
    let model = prov.build(&x_c, &req).unwrap();
    // a small outer penalty: restoring feasibility costs more in f than it saves in 0.1 ||c||_1
    let cauchy = cauchy_at(&model, x_c.clone(), vec![-0.5], PenaltyState::new(0.1, 0.01));
    let ledger = ToleranceLedger::default();
    let mut hess = HessianApprox::new(HessianStrategy::ProblemSupplied, 2);
    let res = solve_submin(&model, &ledger, &cauchy, 1.0, &mut hess, &InexactConfig::default()).unwrap();
    assert_eq!(res.exit, InnerExit::PenaltyRaised);
    assert_eq!(res.x_next, x_c);
    assert!(res.inner_records[0].rho > 0.1);
}
