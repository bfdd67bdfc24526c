//! Models built from the true functions plus a known smooth perturbation.
//!
//! `m(x) = f(x) + eps cos(w_f^T d + theta_f)` and
//! `h_i(x) = c_i(x) + eps cos(w_i^T d + theta_i)` with `d = x - x_k` and
//! `eps = eps0 * decay^level`. Since `|cos(a + t) | <= |cos a| + |t|`, the error
//! functions below bound `|m - f|` and `||h - c||_1` with constant one.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dot, norm2, sub, DenseMatrix, RowSpace};
use crate::model_framework::{
    check_relative_errors, merit_error, BuildRequest, ModelProvider, ProviderError, TunableModel,
};
use crate::problem::{EvalError, ProblemFunctions};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
struct Perturbation<T> {
    w_f: Vec<T>,
    theta_f: T,
    w_c: Vec<Vec<T>>,
    theta_c: Vec<T>,
}

impl<T: Real> Perturbation<T> {
    fn sample(n: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (n as f64).sqrt();
        let dir = |rng: &mut ChaCha8Rng| (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0) * scale)).collect();
        let w_f = dir(&mut rng);
        let theta_f = T::lit(rng.gen_range(0.0..TAU));
        let mut w_c = Vec::with_capacity(m);
        let mut theta_c = Vec::with_capacity(m);
        for _ in 0..m {
            w_c.push(dir(&mut rng));
            theta_c.push(T::lit(rng.gen_range(0.0..TAU)));
        }
        Self { w_f, theta_f, w_c, theta_c }
    }
}

#[derive(Debug)]
pub struct SyntheticModel<T, P: ?Sized> {
    problem: Arc<P>,
    pert: Arc<Perturbation<T>>,
    point: Vec<T>,
    level: usize,
    eps: T,
    refinements: usize,
}

impl<T: Real, P: ?Sized> SyntheticModel<T, P> {
    /// Current perturbation amplitude `eps0 * decay^level`.
    pub fn amplitude(&self) -> T {
        self.eps
    }

    fn phases(&self, x: &[T]) -> (T, Vec<T>) {
        let d = sub(x, &self.point);
        let pf = dot(&self.pert.w_f, &d) + self.pert.theta_f;
        let pc = self.pert.w_c.iter().zip(&self.pert.theta_c).map(|(w, &t)| dot(w, &d) + t).collect();
        (pf, pc)
    }

    fn envelope(&self, w: &[T], theta: T, dist: T) -> T {
        self.eps * T::one().min(theta.cos().abs() + norm2(w) * dist)
    }
}

impl<T: Real, P: ProblemFunctions<T> + ?Sized> TunableModel<T> for SyntheticModel<T, P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn num_constraints(&self) -> usize {
        self.problem.num_constraints()
    }

    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError> {
        let (f, mut c) = self.problem.values(x)?;
        let (pf, pc) = self.phases(x);
        for (ci, p) in c.iter_mut().zip(pc) {
            *ci += self.eps * p.cos();
        }
        Ok((f + self.eps * pf.cos(), c))
    }

    fn derivatives(&self, x: &[T]) -> Result<(Vec<T>, DenseMatrix<T>), EvalError> {
        let (mut g, mut j) = self.problem.derivatives(x)?;
        let (pf, pc) = self.phases(x);
        let sf = self.eps * pf.sin();
        for (gi, &wi) in g.iter_mut().zip(&self.pert.w_f) {
            *gi -= sf * wi;
        }
        for (i, p) in pc.into_iter().enumerate() {
            let si = self.eps * p.sin();
            for (k, &wk) in self.pert.w_c[i].iter().enumerate() {
                j.set(i, k, j.get(i, k) - si * wk);
            }
        }
        Ok((g, j))
    }

    fn error_bounds(&self, x: &[T]) -> Result<(T, T), EvalError> {
        let dist = norm2(&sub(x, &self.point));
        let ef = self.envelope(&self.pert.w_f, self.pert.theta_f, dist);
        let ec = self
            .pert
            .w_c
            .iter()
            .zip(&self.pert.theta_c)
            .map(|(w, &t)| self.envelope(w, t, dist))
            .sum();
        Ok((ef, ec))
    }

    fn hessian(&self, x: &[T], lambda: &[T]) -> Result<Option<DenseMatrix<T>>, EvalError> {
        let Some(mut h) = self.problem.hessian(x, lambda)? else {
            return Ok(None);
        };
        let (pf, pc) = self.phases(x);
        let n = x.len();
        let mut rank_one = |w: &[T], coef: T| {
            for a in 0..n {
                for b in 0..n {
                    h.set(a, b, h.get(a, b) + coef * w[a] * w[b]);
                }
            }
        };
        rank_one(&self.pert.w_f, -self.eps * pf.cos());
        for (i, p) in pc.into_iter().enumerate() {
            rank_one(&self.pert.w_c[i], lambda[i] * self.eps * p.cos());
        }
        Ok(Some(h))
    }

    fn build_point(&self) -> &[T] {
        &self.point
    }

    fn refinement_level(&self) -> usize {
        self.level
    }
}

/// Provider of perturbed models whose accuracy is set by a refinement level.
#[derive(Debug)]
pub struct SyntheticProvider<T, P: ?Sized> {
    problem: Arc<P>,
    pert: Arc<Perturbation<T>>,
    eps0: T,
    decay: T,
    builds: usize,
}

/// Default amplitude at level zero.
pub const SYNTHETIC_EPS0: f64 = 0.1;

/// Synthetic provider with `eps0 = 0.1` and perturbation directions drawn from `seed`.
pub fn synthetic_provider<T: Real, P: ProblemFunctions<T> + ?Sized>(
    problem: Arc<P>,
    decay: T,
    seed: u64,
) -> Result<SyntheticProvider<T, P>, ProviderError> {
    SyntheticProvider::new(problem, T::lit(SYNTHETIC_EPS0), decay, seed)
}

const MAX_LEVEL: usize = 100_000;

impl<T: Real, P: ProblemFunctions<T> + ?Sized> SyntheticProvider<T, P> {
    pub fn new(problem: Arc<P>, eps0: T, decay: T, seed: u64) -> Result<Self, ProviderError> {
        if !(decay > T::zero() && decay < T::one()) {
            return Err(ProviderError::CannotMeetTolerance("decay must lie in (0,1)".into()));
        }
        if !(eps0 >= T::zero() && eps0.is_finite()) {
            return Err(ProviderError::CannotMeetTolerance("eps0 must be finite and nonnegative".into()));
        }
        let pert = Perturbation::sample(problem.dim(), problem.num_constraints(), seed);
        Ok(Self { problem, pert: Arc::new(pert), eps0, decay, builds: 0 })
    }

    /// Model at `point` with a fixed level, bypassing the tolerance search.
    pub fn model_at_level(&self, point: &[T], level: usize) -> SyntheticModel<T, P> {
        let exp = i32::try_from(level).unwrap_or(i32::MAX);
        SyntheticModel {
            problem: Arc::clone(&self.problem),
            pert: Arc::clone(&self.pert),
            point: point.to_vec(),
            level,
            eps: self.eps0 * self.decay.powi(exp),
            refinements: 0,
        }
    }

    pub fn builds(&self) -> usize {
        self.builds
    }

    /// Smallest level `>= start` meeting the tolerance and the gates at `point`.
    fn search(&mut self, point: &[T], start: usize, request: &BuildRequest<'_, T>) -> Result<SyntheticModel<T, P>, ProviderError> {
        if !(request.tau > T::zero()) {
            return Err(ProviderError::CannotMeetTolerance(format!("requested tau {:e}", request.tau)));
        }
        self.builds += 1;
        let mut level = start;
        loop {
            let model = self.model_at_level(point, level);
            let e = merit_error(&model, point, request.rho)?;
            if e <= request.tau {
                let lambda_owned;
                let lambda = match request.lambda {
                    Some(l) => l,
                    None => {
                        let (g, j) = model.derivatives(point)?;
                        lambda_owned = RowSpace::new(&j)?.multiplier(&g);
                        &lambda_owned
                    }
                };
                let gates = check_relative_errors(&model, self.problem.as_ref(), point, Some(lambda), &request.thresholds)?;
                if gates.pass {
                    return Ok(model);
                }
            }
            if model.eps == T::zero() || level >= MAX_LEVEL {
                return Err(ProviderError::CannotMeetTolerance(format!(
                    "no level up to {level} meets tau {:e}",
                    request.tau
                )));
            }
            level += 1;
        }
    }
}

impl<T: Real, P: ProblemFunctions<T> + ?Sized> ModelProvider<T> for SyntheticProvider<T, P> {
    type Model = SyntheticModel<T, P>;

    fn build(&mut self, x: &[T], request: &BuildRequest<'_, T>) -> Result<Self::Model, ProviderError> {
        self.search(x, 0, request)
    }

    /// Raises the level by `2^r` (with `r` the refinements already applied to
    /// this model), then continues the search. The build point is kept.
    fn refine(&mut self, model: &Self::Model, _at: &[T], request: &BuildRequest<'_, T>) -> Result<Self::Model, ProviderError> {
        let jump = 1usize << model.refinements.min(16);
        let point = model.point.clone();
        let mut next = self.search(&point, model.level + jump, request)?;
        next.refinements = model.refinements + 1;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merit::merit_value;
    use crate::model_framework::{model_merit, RelThresholds};
    use crate::providers::analytic::{make_analytic_suite, AnalyticKind, AnalyticProblem};
    use rand::Rng;

    fn req(tau: f64, rho: f64) -> BuildRequest<'static, f64> {
        BuildRequest { tau, rho, lambda: None, thresholds: RelThresholds::default() }
    }

    fn random_ball_point(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
        loop {
            let d: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            if norm2(&d) <= 1.0 {
                return center.iter().zip(&d).map(|(c, di)| c + radius * di).collect();
            }
        }
    }

    #[test]
    fn build_meets_tolerance() {
        for p in make_analytic_suite::<f64>() {
            let p = Arc::new(p);
            let mut prov = synthetic_provider(Arc::clone(&p), 0.5, 7).unwrap();
            for tau in [1e-1, 1e-4, 1e-9] {
                let m = prov.build(p.x0(), &req(tau, 2.0)).unwrap();
                assert!(merit_error(&m, p.x0(), 2.0).unwrap() <= tau);
            }
        }
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let p = Arc::new(AnalyticProblem::<f64>::new(AnalyticKind::P1));
        let mut prov = synthetic_provider(Arc::clone(&p), 0.5, 1).unwrap();
        assert!(matches!(prov.build(p.x0(), &req(0.0, 1.0)), Err(ProviderError::CannotMeetTolerance(_))));
        assert!(synthetic_provider(p, 1.5, 1).is_err());
    }

    #[test]
    fn merit_gap_is_bounded_by_error_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in make_analytic_suite::<f64>() {
            let p = Arc::new(p);
            let prov = synthetic_provider(Arc::clone(&p), 0.5, 3).unwrap();
            let model = prov.model_at_level(p.x0(), 0);
            for rho in [0.5, 1.0, 4.0] {
                for _ in 0..100 {
                    let x = random_ball_point(&mut rng, p.x0(), 1.0);
                    let (f, c) = p.values(&x).unwrap();
                    let gap = (merit_value(f, &c, rho) - model_merit(&model, &x, rho).unwrap()).abs();
                    let (ef, ec) = model.error_bounds(&x).unwrap();
                    let (m, h) = model.values(&x).unwrap();
                    assert!((m - f).abs() <= ef * (1.0 + 1e-12));
                    assert!(crate::linalg::norm1(&sub(&h, &c)) <= ec * (1.0 + 1e-12));
                    assert!(gap <= merit_error(&model, &x, rho).unwrap() * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn deep_level_reproduces_exact_functions() {
        let p = Arc::new(AnalyticProblem::<f64>::new(AnalyticKind::P3));
        let prov = synthetic_provider(Arc::clone(&p), 0.5, 5).unwrap();
        let model = prov.model_at_level(p.x0(), 2000);
        assert_eq!(model.amplitude(), 0.0);
        let x = vec![0.2; 10];
        assert_eq!(model.values(&x).unwrap(), p.values(&x).unwrap());
        assert_eq!(merit_error(&model, &x, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in make_analytic_suite::<f64>() {
            let p = Arc::new(p);
            let prov = synthetic_provider(Arc::clone(&p), 0.5, 9).unwrap();
            let model = prov.model_at_level(p.x0(), 0);
            for _ in 0..10 {
                let x = random_ball_point(&mut rng, p.x0(), 0.5);
                let (g, j) = model.derivatives(&x).unwrap();
                let h = 1e-6;
                for k in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let (fp, cp) = model.values(&xp).unwrap();
                    let (fm, cm) = model.values(&xm).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()));
                    for i in 0..cp.len() {
                        let fdc = (cp[i] - cm[i]) / (2.0 * h);
                        assert!((fdc - j.get(i, k)).abs() <= 1e-5 * (1.0 + j.get(i, k).abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_increases_level_and_keeps_point() {
        let p = Arc::new(AnalyticProblem::<f64>::new(AnalyticKind::P2));
        let mut prov = synthetic_provider(Arc::clone(&p), 0.5, 2).unwrap();
        let m0 = prov.build(p.x0(), &req(1e-2, 1.0)).unwrap();
        let m1 = prov.refine(&m0, &[0.0, 0.0], &req(1e-2, 1.0)).unwrap();
        let m2 = prov.refine(&m1, &[0.0, 0.0], &req(1e-2, 1.0)).unwrap();
        assert_eq!(m1.refinement_level(), m0.refinement_level() + 1);
        assert_eq!(m2.refinement_level(), m1.refinement_level() + 2);
        assert_eq!(m2.build_point(), p.x0());
        assert!(m2.amplitude() < m0.amplitude());
    }

    #[test]
    fn same_seed_same_models() {
        let p = Arc::new(AnalyticProblem::<f64>::new(AnalyticKind::P3));
        let a = synthetic_provider(Arc::clone(&p), 0.5, 42).unwrap().model_at_level(p.x0(), 1);
        let b = synthetic_provider(Arc::clone(&p), 0.5, 42).unwrap().model_at_level(p.x0(), 1);
        let x = vec![0.1; 10];
        assert_eq!(a.values(&x).unwrap(), b.values(&x).unwrap());
    }
}
