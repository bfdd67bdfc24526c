//! Run outcomes and per-iteration history rows shared by the drivers.

use std::fmt;

use crate::merit::PenaltyState;
use crate::problem::EvalCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    LineSearchFailure,
    RankDeficient,
    RefinementBudgetExhausted,
    EvaluationFailure,
    /// A tolerance update or acceptance invariant failed; indicates a logic error.
    InvariantViolation,
    InvalidConfig,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Converged => "Converged",
            Self::MaxIter => "MaxIter",
            Self::LineSearchFailure => "LineSearchFailure",
            Self::RankDeficient => "RankDeficient",
            Self::RefinementBudgetExhausted => "RefinementBudgetExhausted",
            Self::EvaluationFailure => "EvaluationFailure",
            Self::InvariantViolation => "InvariantViolation",
            Self::InvalidConfig => "InvalidConfig",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Current point, multiplier and penalty of a driver.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState<T> {
    pub x: Vec<T>,
    pub lambda: Vec<T>,
    pub penalty: PenaltyState<T>,
    pub k: usize,
    pub counts: EvalCounts,
}

/// One row per outer iteration.
///
/// `stationarity`/`feasibility` are measured on whatever the driver iterates on
/// (true functions for the exact driver, the current model for the model-based
/// one). The `true_*` fields are filled only by instrumented runs.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub stationarity: T,
    pub feasibility: T,
    pub true_stationarity: Option<T>,
    pub true_feasibility: Option<T>,
    /// Merit at `x_k` with the penalty used for this iteration's line search.
    pub merit: T,
    pub rho: T,
    /// Accepted step length; zero on the terminal row.
    pub alpha: T,
    pub step_norm: T,
    pub directional_derivative: T,
    /// Merit at the accepted trial point with the same penalty.
    pub merit_next: T,
    pub cg_iterations: usize,
    pub counts: EvalCounts,
    pub basis_size: usize,
}
