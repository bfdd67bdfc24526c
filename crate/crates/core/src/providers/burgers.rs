//! Steady viscous Burgers control problem on `(0, 1)`.
//!
//! State equation `nu y'' - y y' + (B u)(x) = 0` with Dirichlet data, central
//! differences on `N` interior nodes. The residual is scaled by `-h`:
//!
//! `R_i = (nu/h)(2 y_i - y_{i-1} - y_{i+1}) + (y_{i+1}^2 - y_{i-1}^2)/4 - h (B u)_i`.
//!
//! Objective `f(u) = h/2 sum (y_i - yd_i)^2 + (w/2) u^T G u` with `G` the control
//! mass matrix, and one constraint `c(u) = h sum y_i^2 - T_d`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::linalg::{dot, norm2, DenseMatrix};
use crate::problem::{check_len, EvalCounts, EvalError, ProblemFunctions};

/// Tridiagonal matrix with `lower[i] = A[i][i-1]` and `upper[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.lower[i] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                lower[i] = self.upper[i - 1];
            }
            if i + 1 < n {
                upper[i] = self.lower[i + 1];
            }
        }
        Self { lower, diag: self.diag.clone(), upper }
    }

    /// Thomas algorithm; `None` on a zero pivot.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut beta = self.diag[0];
        if beta == 0.0 {
            return None;
        }
        c[0] = self.upper[0] / beta;
        d[0] = rhs[0] / beta;
        for i in 1..n {
            beta = self.diag[i] - self.lower[i] * c[i - 1];
            if beta == 0.0 || !beta.is_finite() {
                return None;
            }
            c[i] = if i + 1 < n { self.upper[i] / beta } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }
}

/// Hermite bump pair on `[c - w, c + w]`: value-type and slope-type.
fn hermite_pair(x: f64, center: f64, width: f64) -> (f64, f64) {
    let t = (x - center) / width;
    let a = t.abs();
    if a >= 1.0 {
        return (0.0, 0.0);
    }
    let q = (1.0 - a) * (1.0 - a);
    (q * (1.0 + 2.0 * a), t * q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersParams {
    /// Interior grid points.
    pub n: usize,
    pub nu: f64,
    /// Control dimension; even, two bumps per center.
    pub n_u: usize,
    pub bump_width: f64,
    /// Amplitude multiplying every control basis function.
    pub source_scale: f64,
    pub omega_reg: f64,
    pub y_left: f64,
    pub y_right: f64,
    /// Target `yd(x) = target_amp * sin(pi x) + (1 - x) y_left + x y_right`.
    pub target_amp: f64,
    pub t_d: f64,
}

impl Default for BurgersParams {
    fn default() -> Self {
        Self {
            n: 200,
            nu: 0.05,
            n_u: 8,
            bump_width: 0.2,
            source_scale: 1.0,
            omega_reg: 1e-2,
            y_left: 1.0,
            y_right: 0.0,
            target_amp: 0.5,
            t_d: 0.5,
        }
    }
}

impl BurgersParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.n < 3 {
            return Err("grid needs at least 3 interior nodes".into());
        }
        if self.n_u == 0 || !self.n_u.is_multiple_of(2) {
            return Err("n_u must be a positive even number".into());
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err("nu must be positive".into());
        }
        if !(self.bump_width > 0.0) || !(self.omega_reg >= 0.0) {
            return Err("bump width must be positive and omega_reg nonnegative".into());
        }
        let all = [self.source_scale, self.y_left, self.y_right, self.target_amp, self.t_d];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("Burgers parameters must be finite".into());
        }
        Ok(())
    }
}

const NEWTON_TOL: f64 = 1e-12;
/// Accepted residual when rounding stalls Newton just short of `NEWTON_TOL`.
const NEWTON_FLOOR: f64 = 1e-10;
const CACHE_SIZE: usize = 16;

#[derive(Debug)]
struct CacheEntry {
    key: Vec<u64>,
    state: Arc<Vec<f64>>,
    sens: Option<Arc<DenseMatrix<f64>>>,
}

#[derive(Debug, Default)]
struct Counters {
    state: AtomicUsize,
    adjoint: AtomicUsize,
    sens: AtomicUsize,
}

/// Full-order model. Solves are cached per control vector, and only solves
/// that actually run are counted.
#[derive(Debug)]
pub struct Fom1D {
    params: BurgersParams,
    h: f64,
    grid: Vec<f64>,
    /// `B` sampled at the interior nodes (`N x n_u`), scaled by `source_scale`.
    basis: DenseMatrix<f64>,
    mass: DenseMatrix<f64>,
    target: Vec<f64>,
    cache: Mutex<VecDeque<CacheEntry>>,
    counters: Counters,
}

fn key_of(u: &[f64]) -> Vec<u64> {
    u.iter().map(|v| v.to_bits()).collect()
}

impl Fom1D {
    pub fn new(params: BurgersParams) -> Result<Self, String> {
        params.validate()?;
        let n = params.n;
        let h = 1.0 / (n as f64 + 1.0);
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let centers = params.n_u / 2;
        let mut basis = DenseMatrix::zeros(n, params.n_u);
        for (i, &x) in grid.iter().enumerate() {
            for c in 0..centers {
                let center = (c as f64 + 1.0) / (centers as f64 + 1.0);
                let (h1, h2) = hermite_pair(x, center, params.bump_width);
                basis.set(i, 2 * c, params.source_scale * h1);
                basis.set(i, 2 * c + 1, params.source_scale * h2);
            }
        }
        let mut mass = DenseMatrix::zeros(params.n_u, params.n_u);
        for a in 0..params.n_u {
            for b in 0..params.n_u {
                let s: f64 = (0..n).map(|i| basis.get(i, a) * basis.get(i, b)).sum();
                mass.set(a, b, h * s);
            }
        }
        let target = grid
            .iter()
            .map(|&x| params.target_amp * (std::f64::consts::PI * x).sin() + (1.0 - x) * params.y_left + x * params.y_right)
            .collect();
        Ok(Self {
            params,
            h,
            grid,
            basis,
            mass,
            target,
            cache: Mutex::new(VecDeque::new()),
            counters: Counters::default(),
        })
    }

    pub fn params(&self) -> &BurgersParams {
        &self.params
    }

    pub fn grid_size(&self) -> usize {
        self.params.n
    }

    pub fn control_dim(&self) -> usize {
        self.params.n_u
    }

    pub fn mesh_width(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Control mass matrix `G`.
    pub fn mass(&self) -> &DenseMatrix<f64> {
        &self.mass
    }

    /// `-dR/du = h B` (`N x n_u`).
    pub fn source_jacobian(&self) -> DenseMatrix<f64> {
        self.basis.scale(self.h)
    }

    fn source(&self, u: &[f64]) -> Vec<f64> {
        self.basis.matvec(u)
    }

    fn neighbors(&self, y: &[f64], i: usize) -> (f64, f64) {
        let n = y.len();
        let left = if i == 0 { self.params.y_left } else { y[i - 1] };
        let right = if i + 1 == n { self.params.y_right } else { y[i + 1] };
        (left, right)
    }

    /// Full-order residual `R(y; u)`.
    pub fn residual(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        let k = self.params.nu / self.h;
        let b = self.source(u);
        (0..y.len())
            .map(|i| {
                let (l, r) = self.neighbors(y, i);
                k * (2.0 * y[i] - l - r) + 0.25 * (r * r - l * l) - self.h * b[i]
            })
            .collect()
    }

    /// `dR/dy` at `y`.
    pub fn state_jacobian(&self, y: &[f64]) -> Tridiagonal {
        let n = y.len();
        let k = self.params.nu / self.h;
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                lower[i] = -k - 0.5 * y[i - 1];
            }
            if i + 1 < n {
                upper[i] = -k + 0.5 * y[i + 1];
            }
        }
        Tridiagonal { lower, diag: vec![2.0 * k; n], upper }
    }

    /// `w` with `sum_i z_i d^2 R_i / dy^2 = diag(w)`; only the convection term is quadratic.
    pub fn residual_curvature_weights(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        (0..n)
            .map(|j| {
                let left = if j > 0 { z[j - 1] } else { 0.0 };
                let right = if j + 1 < n { z[j + 1] } else { 0.0 };
                0.5 * (left - right)
            })
            .collect()
    }

    /// Energy matrix `K = (nu/h) tridiag(-1, 2, -1)`, the linear part of `dR/dy`.
    pub fn energy_matrix(&self) -> Tridiagonal {
        let n = self.params.n;
        let k = self.params.nu / self.h;
        let mut lower = vec![-k; n];
        let mut upper = vec![-k; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        Tridiagonal { lower, diag: vec![2.0 * k; n], upper }
    }

    /// `sqrt(v^T K v)`
    pub fn energy_norm(&self, v: &[f64]) -> f64 {
        dot(v, &self.energy_matrix().matvec(v)).max(0.0).sqrt()
    }

    /// `sqrt(r^T K^{-1} r)`
    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        match self.energy_matrix().solve(r) {
            Some(z) => dot(r, &z).max(0.0).sqrt(),
            None => f64::INFINITY,
        }
    }

    fn initial_guess(&self) -> Vec<f64> {
        let (a, b) = (self.params.y_left, self.params.y_right);
        self.grid.iter().map(|&x| (1.0 - x) * a + x * b).collect()
    }

    /// Damped Newton from a fixed initial guess, so the result depends on `u` only.
    fn newton(&self, u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut y = self.initial_guess();
        let mut r = self.residual(&y, u);
        let mut rn = norm2(&r);
        for _ in 0..100 {
            if rn <= NEWTON_TOL {
                return Ok(y);
            }
            let jac = self.state_jacobian(&y);
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = jac
                .solve(&neg)
                .ok_or_else(|| EvalError::SolveFailure("singular state Jacobian".into()))?;
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                let rt = self.residual(&trial, u);
                let rtn = norm2(&rt);
                if rtn.is_finite() && rtn < (1.0 - 1e-4 * t) * rn {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if rn <= NEWTON_FLOOR {
            Ok(y)
        } else {
            Err(EvalError::SolveFailure(format!("Newton stalled at residual {rn:e}")))
        }
    }

    fn lookup(&self, key: &[u64]) -> Option<(Arc<Vec<f64>>, Option<Arc<DenseMatrix<f64>>>)> {
        let cache = self.cache.lock().expect("cache lock");
        cache.iter().find(|e| e.key == key).map(|e| (Arc::clone(&e.state), e.sens.clone()))
    }

    fn store(&self, key: Vec<u64>, state: Arc<Vec<f64>>, sens: Option<Arc<DenseMatrix<f64>>>) {
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(e) = cache.iter_mut().find(|e| e.key == key) {
            if sens.is_some() {
                e.sens = sens;
            }
            return;
        }
        if cache.len() == CACHE_SIZE {
            cache.pop_front();
        }
        cache.push_back(CacheEntry { key, state, sens });
    }

    /// State `y(u)`; counts one state solve on a cache miss.
    pub fn solve_state(&self, u: &[f64]) -> Result<Arc<Vec<f64>>, EvalError> {
        check_len(self.params.n_u, u.len())?;
        let key = key_of(u);
        if let Some((y, _)) = self.lookup(&key) {
            return Ok(y);
        }
        self.counters.state.fetch_add(1, Ordering::Relaxed);
        let y = Arc::new(self.newton(u)?);
        self.store(key, Arc::clone(&y), None);
        Ok(y)
    }

    /// Sensitivities `dy/du` (`N x n_u`); counts `n_u` solves on a cache miss.
    pub fn sensitivities(&self, u: &[f64]) -> Result<Arc<DenseMatrix<f64>>, EvalError> {
        let y = self.solve_state(u)?;
        let key = key_of(u);
        if let Some((_, Some(s))) = self.lookup(&key) {
            return Ok(s);
        }
        self.counters.sens.fetch_add(self.params.n_u, Ordering::Relaxed);
        let jac = self.state_jacobian(&y);
        let rhs = self.source_jacobian();
        let cols: Vec<Option<Vec<f64>>> = (0..self.params.n_u)
            .into_par_iter()
            .map(|j| jac.solve(&rhs.column(j)))
            .collect();
        let cols: Vec<Vec<f64>> = cols
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| EvalError::SolveFailure("singular sensitivity system".into()))?;
        let s = Arc::new(DenseMatrix::from_columns(self.params.n, &cols).map_err(|_| EvalError::NonFinite)?);
        self.store(key, y, Some(Arc::clone(&s)));
        Ok(s)
    }

    /// Solves `dR/dy(y(u))^T p = rhs`; counts one adjoint solve.
    pub fn adjoint(&self, u: &[f64], rhs: &[f64]) -> Result<Vec<f64>, EvalError> {
        let y = self.solve_state(u)?;
        check_len(self.params.n, rhs.len())?;
        self.counters.adjoint.fetch_add(1, Ordering::Relaxed);
        self.state_jacobian(&y)
            .transpose()
            .solve(rhs)
            .ok_or_else(|| EvalError::SolveFailure("singular adjoint system".into()))
    }

    pub fn objective_from_state(&self, y: &[f64], u: &[f64]) -> f64 {
        let track: f64 = y.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * self.h * track + 0.5 * self.params.omega_reg * dot(u, &self.mass.matvec(u))
    }

    pub fn constraint_from_state(&self, y: &[f64]) -> f64 {
        self.h * dot(y, y) - self.params.t_d
    }

    /// `df/dy`
    pub fn objective_state_gradient(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.target).map(|(a, b)| self.h * (a - b)).collect()
    }

    /// `dc/dy`
    pub fn constraint_state_gradient(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|a| 2.0 * self.h * a).collect()
    }

    /// Reduced gradients from state and sensitivities (or any approximation of them).
    pub fn gradients_from(&self, y: &[f64], s: &DenseMatrix<f64>, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut gf = s.tr_matvec(&self.objective_state_gradient(y));
        let reg = self.mass.matvec(u);
        for (g, r) in gf.iter_mut().zip(&reg) {
            *g += self.params.omega_reg * r;
        }
        let gc = s.tr_matvec(&self.constraint_state_gradient(y));
        (gf, gc)
    }

    /// Modified Gauss-Newton Hessian of `f - lambda c`: the constraint curvature
    /// term is kept only when it is positive semidefinite (`lambda < 0`).
    pub fn gauss_newton_from(&self, s: &DenseMatrix<f64>, lambda: f64) -> DenseMatrix<f64> {
        let sts = s.transpose().matmul(s);
        let mut weight = self.h;
        if lambda < 0.0 {
            weight += -2.0 * lambda * self.h;
        }
        sts.scale(weight).add(&self.mass.scale(self.params.omega_reg))
    }

    /// Reduced objective gradient through the adjoint: `w G u + h B^T p_f`.
    pub fn adjoint_gradient(&self, u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let y = self.solve_state(u)?;
        let p = self.adjoint(u, &self.objective_state_gradient(&y))?;
        let mut g = self.source_jacobian().tr_matvec(&p);
        for (gi, r) in g.iter_mut().zip(self.mass.matvec(u)) {
            *gi += self.params.omega_reg * r;
        }
        Ok(g)
    }

    pub fn reset_counts(&self) {
        self.counters.state.store(0, Ordering::Relaxed);
        self.counters.adjoint.store(0, Ordering::Relaxed);
        self.counters.sens.store(0, Ordering::Relaxed);
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }
}

impl ProblemFunctions<f64> for Fom1D {
    fn dim(&self) -> usize {
        self.params.n_u
    }

    fn num_constraints(&self) -> usize {
        1
    }

    fn values(&self, u: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let y = self.solve_state(u)?;
        Ok((self.objective_from_state(&y, u), vec![self.constraint_from_state(&y)]))
    }

    fn derivatives(&self, u: &[f64]) -> Result<(Vec<f64>, DenseMatrix<f64>), EvalError> {
        let y = self.solve_state(u)?;
        let s = self.sensitivities(u)?;
        let (gf, gc) = self.gradients_from(&y, &s, u);
        let jac = DenseMatrix::from_rows(&[gc]).map_err(|_| EvalError::NonFinite)?;
        Ok((gf, jac))
    }

    fn hessian(&self, u: &[f64], lambda: &[f64]) -> Result<Option<DenseMatrix<f64>>, EvalError> {
        check_len(1, lambda.len())?;
        let s = self.sensitivities(u)?;
        Ok(Some(self.gauss_newton_from(&s, lambda[0])))
    }

    fn counts(&self) -> EvalCounts {
        EvalCounts {
            fom_state: self.counters.state.load(Ordering::Relaxed),
            fom_adjoint: self.counters.adjoint.load(Ordering::Relaxed),
            fom_sensitivity: self.counters.sens.load(Ordering::Relaxed),
            ..EvalCounts::default()
        }
    }
}
