//! Exact functions presented as a model with zero error.

use std::sync::Arc;

use crate::linalg::DenseMatrix;
use crate::model_framework::{BuildRequest, ModelProvider, ProviderError, TunableModel};
use crate::problem::{EvalError, ProblemFunctions};
use crate::scalar::Real;

#[derive(Debug)]
pub struct ExactModel<T, P: ?Sized> {
    problem: Arc<P>,
    point: Vec<T>,
}

impl<T: Real, P: ProblemFunctions<T> + ?Sized> TunableModel<T> for ExactModel<T, P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }
    fn num_constraints(&self) -> usize {
        self.problem.num_constraints()
    }
    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError> {
        self.problem.values(x)
    }
    fn derivatives(&self, x: &[T]) -> Result<(Vec<T>, DenseMatrix<T>), EvalError> {
        self.problem.derivatives(x)
    }
    fn error_bounds(&self, _x: &[T]) -> Result<(T, T), EvalError> {
        Ok((T::zero(), T::zero()))
    }
    fn hessian(&self, x: &[T], lambda: &[T]) -> Result<Option<DenseMatrix<T>>, EvalError> {
        self.problem.hessian(x, lambda)
    }
    fn build_point(&self) -> &[T] {
        &self.point
    }
    fn refinement_level(&self) -> usize {
        0
    }
}

/// Provider whose models are the true functions.
#[derive(Debug)]
pub struct ExactWrapper<P: ?Sized> {
    problem: Arc<P>,
}

impl<P: ?Sized> ExactWrapper<P> {
    pub fn new(problem: Arc<P>) -> Self {
        Self { problem }
    }
}

/// Provider with `m_k = f`, `h_k = c` and `e^f = e^c = 0`.
pub fn exact_wrapper<P: ?Sized>(problem: Arc<P>) -> ExactWrapper<P> {
    ExactWrapper::new(problem)
}

impl<T: Real, P: ProblemFunctions<T> + ?Sized> ModelProvider<T> for ExactWrapper<P> {
    type Model = ExactModel<T, P>;

    fn build(&mut self, x: &[T], _request: &BuildRequest<'_, T>) -> Result<Self::Model, ProviderError> {
        Ok(ExactModel { problem: Arc::clone(&self.problem), point: x.to_vec() })
    }

    fn refine(&mut self, model: &Self::Model, _at: &[T], _request: &BuildRequest<'_, T>) -> Result<Self::Model, ProviderError> {
        Ok(ExactModel { problem: Arc::clone(&self.problem), point: model.point.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_framework::{check_relative_errors, merit_error, RelThresholds};
    use crate::providers::analytic::{AnalyticKind, AnalyticProblem};

    #[test]
    fn zero_error_and_passing_gates() {
        let p = Arc::new(AnalyticProblem::<f64>::new(AnalyticKind::P3));
        let mut w = exact_wrapper(Arc::clone(&p));
        let req = BuildRequest { tau: 1e-3, rho: 1.0, lambda: None, thresholds: RelThresholds::default() };
        let m = w.build(p.x0(), &req).unwrap();
        for x in [p.x0().to_vec(), vec![0.3; 10]] {
            assert_eq!(merit_error(&m, &x, 5.0).unwrap(), 0.0);
        }
        let chk = check_relative_errors(&m, p.as_ref(), p.x0(), None, &RelThresholds::default()).unwrap();
        assert!(chk.pass);
        assert_eq!(chk.ratios, [0.0, 0.0, 0.0]);
        let r = w.refine(&m, &[0.0; 10], &req).unwrap();
        assert_eq!(r.build_point(), p.x0());
    }
}
