//! Contracts and bookkeeping for models of tunable accuracy.
//!
//! A [`ModelProvider`] builds a [`TunableModel`] `(m_k, h_k)` around the current
//! iterate together with computable error functions `e_k^f`, `e_k^c`. The
//! [`ToleranceLedger`] carries the constants that decide how accurate each new
//! model has to be.

use thiserror::Error;

use crate::linalg::{norm1, norm2, sub, DenseMatrix, LinalgError, RowSpace};
use crate::merit::merit_value;
use crate::problem::{EvalCounts, EvalError, ProblemFunctions};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("model cannot meet requested tolerance: {0}")]
    CannotMeetTolerance(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One model pair `(m_k, h_k)` with error functions.
///
/// Evaluations must be deterministic and safe for concurrent read-only use.
pub trait TunableModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// `(m_k(x), h_k(x))`
    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError>;

    /// `(grad m_k(x), h_k'(x))`
    fn derivatives(&self, x: &[T]) -> Result<(Vec<T>, DenseMatrix<T>), EvalError>;

    /// `(e_k^f(x), e_k^c(x))`, both nonnegative and possibly infinite.
    fn error_bounds(&self, x: &[T]) -> Result<(T, T), EvalError>;

    /// Optional Hessian approximation of `m_k - lambda^T h_k`.
    fn hessian(&self, _x: &[T], _lambda: &[T]) -> Result<Option<DenseMatrix<T>>, EvalError> {
        Ok(None)
    }

    fn build_point(&self) -> &[T];

    fn refinement_level(&self) -> usize;

    /// Reduced dimension for projection-based models, 0 otherwise.
    fn basis_size(&self) -> usize {
        0
    }
}

/// Thresholds `tau^{f,g}`, `tau^{c,g}`, `tau^c` of the relative-error gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelThresholds<T> {
    pub grad: T,
    pub jac: T,
    pub cons: T,
}

impl<T: Real> Default for RelThresholds<T> {
    fn default() -> Self {
        let half = T::lit(0.5);
        Self { grad: half, jac: half, cons: half }
    }
}

/// What the driver asks of a model build or refinement.
#[derive(Debug, Clone, Copy)]
pub struct BuildRequest<'a, T> {
    /// Required bound on `e_k(x_k; rho)` at the build point.
    pub tau: T,
    pub rho: T,
    /// Multiplier for the gate denominators; the model's own least-squares
    /// estimate is used when absent.
    pub lambda: Option<&'a [T]>,
    pub thresholds: RelThresholds<T>,
}

pub trait ModelProvider<T: Real> {
    type Model: TunableModel<T>;

    fn build(&mut self, x: &[T], request: &BuildRequest<'_, T>) -> Result<Self::Model, ProviderError>;

    /// More accurate model around the same build point, using information at `at`.
    fn refine(
        &mut self,
        model: &Self::Model,
        at: &[T],
        request: &BuildRequest<'_, T>,
    ) -> Result<Self::Model, ProviderError>;

    /// Model-side work only; full-order work is counted by the problem.
    fn counts(&self) -> EvalCounts {
        EvalCounts::default()
    }
}

/// Constants of the tolerance management plus the current model tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceLedger<T> {
    pub omega: T,
    pub a1: T,
    pub a2: T,
    /// Forcing sequence `r_k = r0 * gamma^k`.
    pub r0: T,
    pub gamma: T,
    pub tau_current: T,
    pub thresholds: RelThresholds<T>,
}

impl<T: Real> Default for ToleranceLedger<T> {
    fn default() -> Self {
        Self {
            omega: T::lit(0.9),
            a1: T::lit(0.5),
            a2: T::one(),
            r0: T::one(),
            gamma: T::lit(0.5),
            tau_current: T::lit(1e-2),
            thresholds: RelThresholds::default(),
        }
    }
}

impl<T: Real> ToleranceLedger<T> {
    pub fn validate(&self) -> Result<(), String> {
        let (zero, one) = (T::zero(), T::one());
        let open = |v: T| v > zero && v < one;
        if !open(self.omega) {
            return Err("omega must lie in (0,1)".into());
        }
        if !open(self.a1) {
            return Err("a1 must lie in (0,1)".into());
        }
        if !(self.a2 > zero && self.a2 <= one) {
            return Err("a2 must lie in (0,1]".into());
        }
        if !(self.r0 > zero && self.r0.is_finite()) {
            return Err("r0 must be positive".into());
        }
        if !open(self.gamma) {
            return Err("gamma must lie in (0,1)".into());
        }
        if !(self.tau_current > zero && self.tau_current.is_finite()) {
            return Err("tau0 must be positive".into());
        }
        let t = &self.thresholds;
        if !(open(t.grad) && open(t.jac) && open(t.cons)) {
            return Err("relative-error thresholds must lie in (0,1)".into());
        }
        Ok(())
    }

    /// Tolerance handed to providers so that `e <= tau_req` implies `e^omega <= tau`.
    pub fn build_tolerance(&self, tau: T) -> T {
        tau.powf(T::one() / self.omega)
    }
}

/// `e_k(x; rho) = e_k^f(x) + rho e_k^c(x)`
pub fn merit_error<T: Real, M: TunableModel<T> + ?Sized>(model: &M, x: &[T], rho: T) -> Result<T, EvalError> {
    let (ef, ec) = model.error_bounds(x)?;
    Ok(combine_errors(ef, ec, rho))
}

pub(crate) fn combine_errors<T: Real>(ef: T, ec: T, rho: T) -> T {
    if ef.is_infinite() || ec.is_infinite() {
        return T::infinity();
    }
    ef + rho * ec
}

/// Model merit `psi_k(x; rho) = m_k(x) + rho ||h_k(x)||_1`.
pub fn model_merit<T: Real, M: TunableModel<T> + ?Sized>(model: &M, x: &[T], rho: T) -> Result<T, EvalError> {
    let (m, h) = model.values(x)?;
    Ok(merit_value(m, &h, rho))
}

/// `e^omega`
pub fn omega_bound<T: Real>(e_val: T, omega: T) -> T {
    if e_val <= T::zero() {
        return T::zero();
    }
    e_val.powf(omega)
}

/// Outcome of the relative-error gates. Ratios are
/// `[||grad m - grad f|| / D, ||h' - c'||_2 / D, ||h - c||_1 / ||h||_1]` with
/// `D = ||grad m - h'^T lambda||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelErrorCheck<T> {
    pub pass: bool,
    pub ratios: [T; 3],
}

const GATE_FLOOR: f64 = 1e-14;

fn gate_ratio<T: Real>(num: T, den: T, threshold: T) -> (T, bool) {
    let floor = T::lit(GATE_FLOOR);
    if den < floor {
        let ratio = if num < floor { T::zero() } else { T::infinity() };
        return (ratio, num < floor);
    }
    let ratio = num / den;
    (ratio, ratio <= threshold)
}

/// Gate check from already evaluated model and true quantities at one point.
#[allow(clippy::too_many_arguments)]
pub fn relative_errors_from<T: Real>(
    model_grad: &[T],
    model_jac: &DenseMatrix<T>,
    model_c: &[T],
    true_grad: &[T],
    true_jac: &DenseMatrix<T>,
    true_c: &[T],
    lambda: &[T],
    thresholds: &RelThresholds<T>,
) -> RelErrorCheck<T> {
    let stat = norm2(&sub(model_grad, &model_jac.tr_matvec(lambda)));
    let grad_err = norm2(&sub(model_grad, true_grad));
    let jac_err = if model_jac.rows() != true_jac.rows() || model_jac.cols() != true_jac.cols() {
        T::infinity()
    } else if model_jac.rows() == 0 {
        T::zero()
    } else {
        model_jac.sub(true_jac).spectral_norm()
    };
    let cons_err = norm1(&sub(model_c, true_c));
    let (r0, p0) = gate_ratio(grad_err, stat, thresholds.grad);
    let (r1, p1) = gate_ratio(jac_err, stat, thresholds.jac);
    let (r2, p2) = gate_ratio(cons_err, norm1(model_c), thresholds.cons);
    RelErrorCheck {
        pass: p0 && p1 && p2,
        ratios: [r0, r1, r2],
    }
}

/// Evaluates the model and the true problem at `x` and applies the gates.
/// Without `lambda` the model's least-squares multiplier is used.
pub fn check_relative_errors<T, M, P>(
    model: &M,
    problem: &P,
    x: &[T],
    lambda: Option<&[T]>,
    thresholds: &RelThresholds<T>,
) -> Result<RelErrorCheck<T>, ProviderError>
where
    T: Real,
    M: TunableModel<T> + ?Sized,
    P: ProblemFunctions<T> + ?Sized,
{
    let (_, h) = model.values(x)?;
    let (gm, hj) = model.derivatives(x)?;
    let (_, c) = problem.values(x)?;
    let (gf, cj) = problem.derivatives(x)?;
    let owned;
    let lambda = match lambda {
        Some(l) => l,
        None => {
            owned = RowSpace::new(&hj)?.multiplier(&gm);
            &owned
        }
    };
    Ok(relative_errors_from(&gm, &hj, &h, &gf, &cj, &c, lambda, thresholds))
}

/// Merit values of the current model needed for the next tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritSamples<T> {
    /// `psi_k(x_k; rho_k)`
    pub at_xk: T,
    /// `psi_k(x_k^C; rho_k)`
    pub at_xc: T,
    /// `psi_k(x_{k+1}; rho_k)`
    pub at_next: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("tolerance update has no positive value ({value:e})")]
pub struct Infeasible {
    pub value: f64,
}

/// `tau_{k+1} = min{ r_k, -e^omega - psi(x_{k+1}) + psi(x^C) + (1-a1)(psi(x_k) - psi(x^C)) }`
pub fn next_tolerance<T: Real>(
    ledger: &ToleranceLedger<T>,
    psi: &MeritSamples<T>,
    e_next_pow_omega: T,
    r_k: T,
) -> Result<T, Infeasible> {
    let slack = -e_next_pow_omega - psi.at_next + psi.at_xc + (T::one() - ledger.a1) * (psi.at_xk - psi.at_xc);
    let tau = r_k.min(slack);
    if tau > T::zero() {
        Ok(tau)
    } else {
        Err(Infeasible { value: tau.to_f64_lossy() })
    }
}

/// Right-hand side of the error budget: `min{ r_k, a2 (1-a1) decrease }`.
pub fn error_budget<T: Real>(ledger: &ToleranceLedger<T>, r_k: T, psi_decrease: T) -> T {
    r_k.min(ledger.a2 * (T::one() - ledger.a1) * psi_decrease)
}

/// Acceptance test for a generalized Cauchy point.
pub fn cauchy_acceptable<T: Real>(ledger: &ToleranceLedger<T>, e_at_xc_pow_omega: T, r_k: T, psi_decrease: T) -> bool {
    e_at_xc_pow_omega <= error_budget(ledger, r_k, psi_decrease)
}

/// `r_k = r0 gamma^k`
pub fn forcing_value<T: Real>(ledger: &ToleranceLedger<T>, k: usize) -> T {
    let k = i32::try_from(k).unwrap_or(i32::MAX);
    ledger.r0 * ledger.gamma.powi(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Fixed {
        x: Vec<f64>,
        ef: f64,
        ec: f64,
    }

    impl TunableModel<f64> for Fixed {
        fn dim(&self) -> usize {
            1
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn values(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
            Ok((x[0], vec![]))
        }
        fn derivatives(&self, _x: &[f64]) -> Result<(Vec<f64>, DenseMatrix<f64>), EvalError> {
            Ok((vec![1.0], DenseMatrix::zeros(0, 1)))
        }
        fn error_bounds(&self, _x: &[f64]) -> Result<(f64, f64), EvalError> {
            Ok((self.ef, self.ec))
        }
        fn build_point(&self) -> &[f64] {
            &self.x
        }
        fn refinement_level(&self) -> usize {
            0
        }
    }

    #[test]
    fn merit_error_examples() {
        let m = Fixed { x: vec![0.0], ef: 0.1, ec: 0.2 };
        assert!((merit_error(&m, &[0.0], 3.0).unwrap() - 0.7).abs() < 1e-15);
        let m = Fixed { x: vec![0.0], ef: 0.0, ec: 0.0 };
        assert_eq!(merit_error(&m, &[5.0], 3.0).unwrap(), 0.0);
        let m = Fixed { x: vec![0.0], ef: 0.1, ec: f64::INFINITY };
        assert_eq!(merit_error(&m, &[0.0], 3.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn omega_bound_examples() {
        assert!((omega_bound(0.01f64, 0.5) - 0.1).abs() < 1e-15);
        assert_eq!(omega_bound(0.0, 0.5), 0.0);
        for w in [0.1, 0.5, 0.9] {
            assert_eq!(omega_bound(1.0, w), 1.0);
        }
        assert!(omega_bound(0.3, 0.9) >= 0.3);
    }

    #[test]
    fn relative_error_examples() {
        let jm = DenseMatrix::<f64>::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let th = RelThresholds { grad: 0.1, jac: 0.1, cons: 0.1 };
        // grad m - h'^T lambda = (1, 0) with lambda = 0
        let chk = relative_errors_from(&[1.0, 0.0], &jm, &[0.3], &[1.05, 0.0], &jm, &[0.3], &[0.0], &th);
        assert!(chk.pass);
        assert!((chk.ratios[0] - 0.05).abs() < 1e-12);
        assert_eq!(chk.ratios[1], 0.0);
        assert_eq!(chk.ratios[2], 0.0);

        let chk = relative_errors_from(&[1.0, 0.0], &jm, &[0.3], &[3.0, 0.0], &jm, &[0.3], &[0.0], &th);
        assert!(!chk.pass);
        assert!(chk.ratios[0] > 0.1);
    }

    #[test]
    fn near_stationary_denominator_convention() {
        let jm = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let th = RelThresholds::default();
        // gradient exactly in the row space: D = 0
        let ok = relative_errors_from(&[1.0, 0.0], &jm, &[0.0], &[1.0, 0.0], &jm, &[0.0], &[1.0], &th);
        assert!(ok.pass);
        let bad = relative_errors_from(&[1.0, 0.0], &jm, &[0.0], &[1.0, 1e-6], &jm, &[0.0], &[1.0], &th);
        assert!(!bad.pass);
    }

    #[test]
    fn next_tolerance_examples() {
        let ledger = ToleranceLedger::<f64>::default();
        let psi = MeritSamples { at_xk: 2.2, at_xc: 1.2, at_next: 1.0 };
        assert_eq!(next_tolerance(&ledger, &psi, 0.1, 0.5).unwrap(), 0.5);

        // x_{k+1} = x^C with the error at its largest admissible value
        let dec = 1.0;
        let psi = MeritSamples { at_xk: 2.0, at_xc: 1.0, at_next: 1.0 };
        let e = ledger.a2 * (1.0 - ledger.a1) * dec;
        let r = 10.0;
        // with a2 = 1 the slack is exactly zero: the boundary case has no positive tolerance
        let err = next_tolerance(&ledger, &psi, e, r).unwrap_err();
        assert_eq!(err.value, 0.0);
        let ledger2 = ToleranceLedger { a2: 0.5, ..ToleranceLedger::default() };
        let e2 = ledger2.a2 * (1.0 - ledger2.a1) * dec;
        let tau2 = next_tolerance(&ledger2, &psi, e2, r).unwrap();
        assert!((tau2 - 0.25).abs() < 1e-15);

        let psi = MeritSamples { at_xk: 2.2, at_xc: 1.2, at_next: 1.9 };
        assert!(next_tolerance(&ledger, &psi, 0.1, 0.5).is_err());
    }

    #[test]
    fn cauchy_examples() {
        let ledger = ToleranceLedger::<f64>::default();
        assert!(cauchy_acceptable(&ledger, 0.05, 0.5, 1.0));
        assert!(cauchy_acceptable(&ledger, 0.0, 0.5, 0.0));
        assert!(!cauchy_acceptable(&ledger, 1e-300, 0.5, 0.0));
        assert!(!cauchy_acceptable(&ledger, 0.6, 0.5, 100.0));
    }

    #[test]
    fn forcing_examples() {
        let ledger = ToleranceLedger::<f64>::default();
        assert_eq!(forcing_value(&ledger, 0), 1.0);
        assert_eq!(forcing_value(&ledger, 3), 0.125);
        assert!(forcing_value(&ledger, 2000) == 0.0 || forcing_value(&ledger, 200) < 1e-50);
        for k in 0..100 {
            assert!(forcing_value(&ledger, k + 1) < forcing_value(&ledger, k));
        }
    }

    #[test]
    fn ledger_validation() {
        assert!(ToleranceLedger::<f64>::default().validate().is_ok());
        let bad = ToleranceLedger { omega: 1.0, ..ToleranceLedger::<f64>::default() };
        assert!(bad.validate().is_err());
        let bad = ToleranceLedger { a2: 1.5, ..ToleranceLedger::<f64>::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn omega_bound_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0, w in 0.01f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(omega_bound(lo, w) <= omega_bound(hi, w));
        }

        #[test]
        fn next_tolerance_never_exceeds_forcing(
            xk in 0.0f64..10.0, dxc in 0.0f64..5.0, dnext in 0.0f64..5.0, e in 0.0f64..1.0, r in 1e-6f64..1.0,
        ) {
            let ledger = ToleranceLedger::<f64>::default();
            let psi = MeritSamples { at_xk: xk, at_xc: xk - dxc, at_next: xk - dxc - dnext };
            if let Ok(t) = next_tolerance(&ledger, &psi, e, r) {
                prop_assert!(t <= r && t > 0.0);
            }
        }

        #[test]
        fn build_tolerance_implies_omega_bound(tau in 1e-12f64..1.0, w in 0.05f64..0.95) {
            let ledger = ToleranceLedger { omega: w, ..ToleranceLedger::default() };
            let req = ledger.build_tolerance(tau);
            prop_assert!(req <= tau);
            prop_assert!(omega_bound(req, w) <= tau * (1.0 + 1e-12));
        }
    }
}
