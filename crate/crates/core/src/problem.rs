//! Evaluation contract for the true objective and constraints.

use std::ops::AddAssign;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("full-order solve failed: {0}")]
    SolveFailure(String),
    #[error("evaluation produced non-finite values")]
    NonFinite,
}

/// Work counters accumulated by problems and model providers.
///
/// Analytic problems count calls to [`ProblemFunctions::values`] and
/// [`ProblemFunctions::derivatives`]; PDE-backed problems count the individual
/// full-order solves behind them instead.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub values: usize,
    pub derivatives: usize,
    pub fom_state: usize,
    pub fom_adjoint: usize,
    pub fom_sensitivity: usize,
    pub rom_solves: usize,
    pub model_evals: usize,
}

impl EvalCounts {
    pub fn fom_solves(&self) -> usize {
        self.fom_state + self.fom_adjoint + self.fom_sensitivity
    }

    /// Everything that touched the true problem.
    pub fn full_order_evals(&self) -> usize {
        self.values + self.derivatives + self.fom_solves()
    }

    /// Everything that only touched a model.
    pub fn model_side_evals(&self) -> usize {
        self.rom_solves + self.model_evals
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        self.values += o.values;
        self.derivatives += o.derivatives;
        self.fom_state += o.fom_state;
        self.fom_adjoint += o.fom_adjoint;
        self.fom_sensitivity += o.fom_sensitivity;
        self.rom_solves += o.rom_solves;
        self.model_evals += o.model_evals;
    }
}

/// Objective `f: R^n -> R` and equality constraints `c: R^n -> R^m`.
///
/// Implementations must tolerate concurrent read-only evaluation.
pub trait ProblemFunctions<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// `(f(x), c(x))`
    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError>;

    /// `(grad f(x), c'(x))` with `c'(x)` of shape `m x n`.
    fn derivatives(&self, x: &[T]) -> Result<(Vec<T>, DenseMatrix<T>), EvalError>;

    /// Optional problem-supplied Hessian approximation of the Lagrangian
    /// `f - lambda^T c`.
    fn hessian(&self, _x: &[T], _lambda: &[T]) -> Result<Option<DenseMatrix<T>>, EvalError> {
        Ok(None)
    }

    fn counts(&self) -> EvalCounts {
        EvalCounts::default()
    }
}

impl<T: Real, P: ProblemFunctions<T> + ?Sized> ProblemFunctions<T> for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_constraints(&self) -> usize {
        (**self).num_constraints()
    }
    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError> {
        (**self).values(x)
    }
    fn derivatives(&self, x: &[T]) -> Result<(Vec<T>, DenseMatrix<T>), EvalError> {
        (**self).derivatives(x)
    }
    fn hessian(&self, x: &[T], lambda: &[T]) -> Result<Option<DenseMatrix<T>>, EvalError> {
        (**self).hessian(x, lambda)
    }
    fn counts(&self) -> EvalCounts {
        (**self).counts()
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<(), EvalError> {
    if expected != got {
        return Err(EvalError::Dimension { expected, got });
    }
    Ok(())
}

/// `||grad - J^T lambda||_2`
pub fn lagrangian_gradient_norm<T: Real>(grad: &[T], jac: &DenseMatrix<T>, lambda: &[T]) -> T {
    let jl = jac.tr_matvec(lambda);
    crate::linalg::norm2(&crate::linalg::sub(grad, &jl))
}
