//! The l1 merit function `phi(x; rho) = f(x) + rho ||c(x)||_1`, its directional
//! derivative along linearized-feasible steps, the penalty update, and a
//! backtracking line search.
//!
//! The same routines serve the exact driver and the model-based drivers; callers
//! evaluate the merit through a closure, so whether `f`/`c` are true functions or
//! models is invisible here.

use thiserror::Error;

use crate::linalg::{dot, norm1};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeritError {
    #[error("no acceptable step after {trials} trials (last alpha {last_alpha:e})")]
    LineSearchFailure { trials: usize, last_alpha: f64 },
    #[error("directional derivative {0:e} is not a descent value")]
    NotDescent(f64),
    #[error("invalid line-search parameters: {0}")]
    InvalidParams(String),
}

/// `f + rho ||c||_1`
pub fn merit_value<T: Real>(f_val: T, c_val: &[T], rho: T) -> T {
    f_val + rho * norm1(c_val)
}

/// `grad_f^T s - rho ||c||_1`, valid for steps with `c + J s = 0`.
pub fn merit_directional_derivative<T: Real>(grad_f: &[T], s: &[T], c_val: &[T], rho: T) -> T {
    dot(grad_f, s) - rho * norm1(c_val)
}

/// Penalty parameter with its update history.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState<T> {
    pub rho: T,
    pub sigma: T,
    pub history: Vec<T>,
}

impl<T: Real> PenaltyState<T> {
    pub fn new(rho0: T, sigma: T) -> Self {
        Self {
            rho: rho0,
            sigma,
            history: vec![rho0],
        }
    }

    /// Keeps `rho` when `rho >= ||lambda||_inf + sigma`, otherwise resets it to
    /// `2 ||lambda||_inf + sigma`. Returns whether `rho` changed.
    pub fn update(&mut self, lambda_inf: T) -> bool {
        let changed = self.rho < lambda_inf + self.sigma;
        if changed {
            self.rho = T::lit(2.0) * lambda_inf + self.sigma;
        }
        self.history.push(self.rho);
        changed
    }
}

/// Functional form of [`PenaltyState::update`].
pub fn update_penalty<T: Real>(state: &PenaltyState<T>, lambda_inf: T) -> PenaltyState<T> {
    let mut next = state.clone();
    next.update(lambda_inf);
    next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams<T> {
    /// Sufficient-decrease constant in (0, 1).
    pub c1: T,
    /// Contraction bracket `0 < beta1 <= beta2 < 1`.
    pub beta1: T,
    pub beta2: T,
    /// Initial trial step in `[alpha_floor, 1]`.
    pub alpha0: T,
    pub alpha_floor: T,
    pub max_backtracks: usize,
}

impl<T: Real> Default for LineSearchParams<T> {
    fn default() -> Self {
        Self {
            c1: T::lit(1e-4),
            beta1: T::lit(0.5),
            beta2: T::lit(0.5),
            alpha0: T::one(),
            alpha_floor: T::one(),
            max_backtracks: 60,
        }
    }
}

impl<T: Real> LineSearchParams<T> {
    pub fn validate(&self) -> Result<(), MeritError> {
        let (zero, one) = (T::zero(), T::one());
        let bad = |msg: &str| Err(MeritError::InvalidParams(msg.to_string()));
        if !(self.c1 > zero && self.c1 < one) {
            return bad("c1 must lie in (0,1)");
        }
        if !(self.beta1 > zero && self.beta1 <= self.beta2 && self.beta2 < one) {
            return bad("need 0 < beta1 <= beta2 < 1");
        }
        if !(self.alpha_floor > zero && self.alpha_floor <= self.alpha0 && self.alpha0 <= one) {
            return bad("need 0 < alpha_floor <= alpha0 <= 1");
        }
        Ok(())
    }

    /// Next trial inside `[beta1, beta2] * alpha`; safeguarded quadratic
    /// interpolation when the bracket is nondegenerate.
    fn contract(&self, alpha: T, phi0: T, d0: T, phi_alpha: T) -> T {
        if self.beta1 == self.beta2 {
            return self.beta1 * alpha;
        }
        let denom = T::lit(2.0) * (phi_alpha - phi0 - d0 * alpha);
        let trial = if denom > T::zero() && phi_alpha.is_finite() {
            -d0 * alpha * alpha / denom
        } else {
            self.beta1 * alpha
        };
        trial.max(self.beta1 * alpha).min(self.beta2 * alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome<T> {
    pub alpha: T,
    pub value: T,
    pub evals: usize,
}

/// `phi(alpha) <= phi0 + c1 alpha d0`
#[inline]
pub fn sufficient_decrease<T: Real>(phi_alpha: T, phi0: T, d0: T, alpha: T, c1: T) -> bool {
    phi_alpha <= phi0 + c1 * alpha * d0
}

/// Backtracking on the sufficient-decrease condition only.
pub fn backtracking_search<T: Real>(
    phi: impl FnMut(T) -> T,
    phi0: T,
    d0: T,
    params: &LineSearchParams<T>,
) -> Result<LineSearchOutcome<T>, MeritError> {
    backtracking_search_with(phi, phi0, d0, params, |_, _| true)
}

/// Backtracking where a trial is accepted only if it gives sufficient decrease
/// and `accept(alpha, phi(alpha))` holds. Non-finite merit values are rejected.
pub fn backtracking_search_with<T: Real>(
    mut phi: impl FnMut(T) -> T,
    phi0: T,
    d0: T,
    params: &LineSearchParams<T>,
    mut accept: impl FnMut(T, T) -> bool,
) -> Result<LineSearchOutcome<T>, MeritError> {
    params.validate()?;
    if !(d0 <= T::zero()) {
        return Err(MeritError::NotDescent(d0.to_f64_lossy()));
    }
    let mut alpha = params.alpha0;
    let trials = params.max_backtracks + 1;
    for evals in 1..=trials {
        let value = phi(alpha);
        if value.is_finite()
            && sufficient_decrease(value, phi0, d0, alpha, params.c1)
            && accept(alpha, value)
        {
            return Ok(LineSearchOutcome {
                alpha,
                value,
                evals,
            });
        }
        if evals < trials {
            alpha = params.contract(alpha, phi0, d0, value);
        }
    }
    Err(MeritError::LineSearchFailure {
        trials,
        last_alpha: alpha.to_f64_lossy(),
    })
}
