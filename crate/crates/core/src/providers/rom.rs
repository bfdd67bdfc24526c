//! Snapshot-Galerkin reduced model of the Burgers control problem.
//!
//! The basis holds FOM states and Lagrangian adjoints from every build and
//! refinement point plus the sensitivities at the latest build point. The
//! reduced state minimizes `||R(V yhat; u)||_{K^-1}` over `yhat` (a
//! Petrov-Galerkin projection with test basis `K^-1 J V`), so enlarging the
//! basis can never increase the residual.
//!
//! Error indicators are dual-weighted residual bounds
//! `e^f(u) = ||p_f||_K ||R(V yhat(u); u)||_{K^-1}` (same with `p_c`), where
//! `K` is the diffusion part of the state Jacobian and `p_f`, `p_c` are the FOM
//! adjoints at the build point.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::linalg::{norm2, DenseMatrix, Lu};
use crate::model_framework::{BuildRequest, ModelProvider, ProviderError, TunableModel};
use crate::problem::{check_len, EvalCounts, EvalError};

use super::burgers::Fom1D;
use super::snapshots::SnapshotRegistry;

const REDUCED_TOL: f64 = 1e-12;
const REDUCED_FLOOR: f64 = 1e-10;

#[derive(Debug)]
struct Reduced {
    y: Vec<f64>,
    /// `d yhat / du` (`r x n_u`)
    dyhat: DenseMatrix<f64>,
    residual_dual: f64,
    grad_norm: f64,
}

struct Linearization {
    y: Vec<f64>,
    grad: Vec<f64>,
    grad_norm: f64,
    hess: DenseMatrix<f64>,
    /// `K^{-1} J V`
    z: DenseMatrix<f64>,
    residual_dual: f64,
}

#[derive(Debug)]
pub struct RomModel {
    fom: Arc<Fom1D>,
    v: DenseMatrix<f64>,
    point: Vec<f64>,
    yhat0: Vec<f64>,
    weight_f: f64,
    weight_c: f64,
    level: usize,
    solves: Arc<AtomicUsize>,
    cache: Mutex<Option<(Vec<u64>, Arc<Reduced>)>>,
}

impl RomModel {
    /// Model on a given orthonormal basis around `point`; solves the FOM state
    /// and both adjoints at `point`.
    pub fn with_basis(fom: Arc<Fom1D>, v: DenseMatrix<f64>, point: &[f64]) -> Result<Self, ProviderError> {
        let y = fom.solve_state(point)?;
        let p_f = fom.adjoint(point, &fom.objective_state_gradient(&y))?;
        let p_c = fom.adjoint(point, &fom.constraint_state_gradient(&y))?;
        Self::assemble(fom, v, point, &y, &p_f, &p_c, 0, Arc::new(AtomicUsize::new(0)))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        fom: Arc<Fom1D>,
        v: DenseMatrix<f64>,
        point: &[f64],
        y: &[f64],
        p_f: &[f64],
        p_c: &[f64],
        level: usize,
        solves: Arc<AtomicUsize>,
    ) -> Result<Self, ProviderError> {
        if v.rows() != fom.grid_size() || v.cols() == 0 {
            return Err(ProviderError::CannotMeetTolerance("empty or mis-sized reduced basis".into()));
        }
        let yhat0 = v.tr_matvec(y);
        Ok(Self {
            weight_f: fom.energy_norm(p_f),
            weight_c: fom.energy_norm(p_c),
            fom,
            v,
            point: point.to_vec(),
            yhat0,
            level,
            solves,
            cache: Mutex::new(None),
        })
    }

    pub fn basis(&self) -> &DenseMatrix<f64> {
        &self.v
    }

    /// Damped Newton on the stationarity condition of `1/2 ||R(V yhat; u)||^2_{K^-1}`,
    /// warm-started at the projected build-point state.
    fn solve(&self, u: &[f64]) -> Result<Arc<Reduced>, EvalError> {
        check_len(self.point.len(), u.len())?;
        let key: Vec<u64> = u.iter().map(|x| x.to_bits()).collect();
        if let Some((k, r)) = self.cache.lock().expect("rom cache").as_ref() {
            if *k == key {
                return Ok(Arc::clone(r));
            }
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut yhat = self.yhat0.clone();
        let mut lin = self.linearize(&yhat, u)?;
        for _ in 0..60 {
            if lin.grad_norm <= REDUCED_TOL {
                break;
            }
            let lu = Lu::factor(&lin.hess).ok_or_else(|| EvalError::SolveFailure("singular reduced Hessian".into()))?;
            let delta = lu.solve(&lin.grad);
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = yhat.iter().zip(&delta).map(|(a, d)| a - t * d).collect();
                let lt = self.linearize(&trial, u)?;
                if lt.grad_norm.is_finite() && lt.grad_norm < (1.0 - 1e-4 * t) * lin.grad_norm {
                    (yhat, lin) = (trial, lt);
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if lin.grad_norm > REDUCED_FLOOR {
            return Err(EvalError::SolveFailure(format!("reduced Newton stalled at {:e}", lin.grad_norm)));
        }
        let lu = Lu::factor(&lin.hess).ok_or_else(|| EvalError::SolveFailure("singular reduced Hessian".into()))?;
        // d yhat / du = H^{-1} Z^T (h B)
        let rhs = lin.z.transpose().matmul(&self.fom.source_jacobian());
        let cols: Vec<Vec<f64>> = rhs.columns().iter().map(|c| lu.solve(c)).collect();
        let dyhat = DenseMatrix::from_columns(self.v.cols(), &cols).map_err(|_| EvalError::NonFinite)?;
        let reduced = Arc::new(Reduced { residual_dual: lin.residual_dual, y: lin.y, dyhat, grad_norm: lin.grad_norm });
        *self.cache.lock().expect("rom cache") = Some((key, Arc::clone(&reduced)));
        Ok(reduced)
    }

    /// Gradient and Hessian of `1/2 ||R||^2_{K^-1}` in reduced coordinates.
    fn linearize(&self, yhat: &[f64], u: &[f64]) -> Result<Linearization, EvalError> {
        let singular = || EvalError::SolveFailure("singular energy matrix".into());
        let k = self.fom.energy_matrix();
        let y = self.v.matvec(yhat);
        let res = self.fom.residual(&y, u);
        if !res.iter().all(|v| v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        let zr = k.solve(&res).ok_or_else(singular)?;
        let jac = self.fom.state_jacobian(&y);
        let jv: Vec<Vec<f64>> = self.v.columns().iter().map(|c| jac.matvec(c)).collect();
        let kinv_jv: Vec<Vec<f64>> = jv.iter().map(|c| k.solve(c).ok_or_else(singular)).collect::<Result<_, _>>()?;
        let n = self.v.rows();
        let jv = DenseMatrix::from_columns(n, &jv).map_err(|_| EvalError::NonFinite)?;
        let z = DenseMatrix::from_columns(n, &kinv_jv).map_err(|_| EvalError::NonFinite)?;
        let grad = z.tr_matvec(&res);
        // second-order term sum_i (K^-1 R)_i V^T (d^2 R_i) V
        let w = self.fom.residual_curvature_weights(&zr);
        let r = self.v.cols();
        let mut curv = DenseMatrix::zeros(r, r);
        for a in 0..r {
            for b in a..r {
                let s: f64 = (0..n).map(|i| w[i] * self.v.get(i, a) * self.v.get(i, b)).sum();
                curv.set(a, b, s);
                curv.set(b, a, s);
            }
        }
        let hess = jv.transpose().matmul(&z).add(&curv);
        Ok(Linearization {
            grad_norm: norm2(&grad),
            grad,
            hess,
            z,
            residual_dual: crate::linalg::dot(&res, &zr).max(0.0).sqrt(),
            y,
        })
    }

    /// Prolonged reduced sensitivities `V dyhat/du`.
    fn sensitivities(&self, red: &Reduced) -> DenseMatrix<f64> {
        self.v.matmul(&red.dyhat)
    }

    /// Norm of the reduced stationarity condition at `u`.
    pub fn projected_residual(&self, u: &[f64]) -> Result<f64, EvalError> {
        Ok(self.solve(u)?.grad_norm)
    }
}

impl TunableModel<f64> for RomModel {
    fn dim(&self) -> usize {
        self.fom.control_dim()
    }

    fn num_constraints(&self) -> usize {
        1
    }

    fn values(&self, u: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let red = self.solve(u)?;
        Ok((self.fom.objective_from_state(&red.y, u), vec![self.fom.constraint_from_state(&red.y)]))
    }

    fn derivatives(&self, u: &[f64]) -> Result<(Vec<f64>, DenseMatrix<f64>), EvalError> {
        let red = self.solve(u)?;
        let s = self.sensitivities(&red);
        let (gf, gc) = self.fom.gradients_from(&red.y, &s, u);
        let jac = DenseMatrix::from_rows(&[gc]).map_err(|_| EvalError::NonFinite)?;
        Ok((gf, jac))
    }

    fn error_bounds(&self, u: &[f64]) -> Result<(f64, f64), EvalError> {
        let red = self.solve(u)?;
        Ok((self.weight_f * red.residual_dual, self.weight_c * red.residual_dual))
    }

    fn hessian(&self, u: &[f64], lambda: &[f64]) -> Result<Option<DenseMatrix<f64>>, EvalError> {
        check_len(1, lambda.len())?;
        let red = self.solve(u)?;
        Ok(Some(self.fom.gauss_newton_from(&self.sensitivities(&red), lambda[0])))
    }

    fn build_point(&self) -> &[f64] {
        &self.point
    }

    fn refinement_level(&self) -> usize {
        self.level
    }

    fn basis_size(&self) -> usize {
        self.v.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomSettings {
    /// Relative drop tolerance for both orthonormalization stages.
    pub drop_tol: f64,
    /// Refinements that would grow the basis past this size are refused.
    pub max_basis: usize,
}

impl Default for RomSettings {
    fn default() -> Self {
        Self { drop_tol: 1e-10, max_basis: 60 }
    }
}

/// Build-point data shared by a model and its refinements.
#[derive(Debug, Clone)]
struct Anchor {
    point: Vec<f64>,
    y: Vec<f64>,
    p_f: Vec<f64>,
    p_c: Vec<f64>,
}

#[derive(Debug)]
pub struct RomProvider {
    fom: Arc<Fom1D>,
    settings: RomSettings,
    registry: SnapshotRegistry,
    anchor: Option<Anchor>,
    solves: Arc<AtomicUsize>,
    max_basis_seen: usize,
}

pub fn rom_provider(fom: Arc<Fom1D>) -> RomProvider {
    RomProvider::new(fom, RomSettings::default())
}

impl RomProvider {
    pub fn new(fom: Arc<Fom1D>, settings: RomSettings) -> Self {
        Self {
            fom,
            settings,
            registry: SnapshotRegistry::new(),
            anchor: None,
            solves: Arc::new(AtomicUsize::new(0)),
            max_basis_seen: 0,
        }
    }

    pub fn registry(&self) -> &SnapshotRegistry {
        &self.registry
    }

    pub fn max_basis_size(&self) -> usize {
        self.max_basis_seen
    }

    fn assemble(&mut self, level: usize) -> Result<RomModel, ProviderError> {
        let a = self.anchor.as_ref().expect("anchor set before assembly");
        let v = self.registry.basis(self.settings.drop_tol);
        if v.cols() > self.settings.max_basis {
            return Err(ProviderError::CannotMeetTolerance(format!(
                "basis size {} exceeds cap {}",
                v.cols(),
                self.settings.max_basis
            )));
        }
        self.max_basis_seen = self.max_basis_seen.max(v.cols());
        RomModel::assemble(Arc::clone(&self.fom), v, &a.point, &a.y, &a.p_f, &a.p_c, level, Arc::clone(&self.solves))
    }
}

impl ModelProvider<f64> for RomProvider {
    type Model = RomModel;

    fn build(&mut self, x: &[f64], request: &BuildRequest<'_, f64>) -> Result<RomModel, ProviderError> {
        let fom = Arc::clone(&self.fom);
        let y = fom.solve_state(x)?;
        let s = fom.sensitivities(x)?;
        let p_f = fom.adjoint(x, &fom.objective_state_gradient(&y))?;
        let p_c = fom.adjoint(x, &fom.constraint_state_gradient(&y))?;
        let lambda = match request.lambda {
            Some(l) => {
                check_len(1, l.len())?;
                l[0]
            }
            None => {
                let (gf, gc) = fom.gradients_from(&y, &s, x);
                let gg = crate::linalg::dot(&gc, &gc);
                if gg > 0.0 {
                    crate::linalg::dot(&gc, &gf) / gg
                } else {
                    0.0
                }
            }
        };
        self.registry.push_state(y.to_vec());
        self.registry.push_adjoint(p_f.iter().zip(&p_c).map(|(a, b)| a - lambda * b).collect());
        self.registry.set_sensitivities(s.columns());
        self.anchor = Some(Anchor { point: x.to_vec(), y: y.to_vec(), p_f, p_c });
        self.assemble(0)
    }

    fn refine(&mut self, model: &RomModel, at: &[f64], _request: &BuildRequest<'_, f64>) -> Result<RomModel, ProviderError> {
        let before = model.basis_size();
        let y = self.fom.solve_state(at)?;
        self.registry.push_state(y.to_vec());
        let refined = self.assemble(model.level + 1)?;
        if refined.basis_size() <= before {
            return Err(ProviderError::CannotMeetTolerance("snapshot at refinement point adds nothing to the basis".into()));
        }
        Ok(refined)
    }

    fn counts(&self) -> EvalCounts {
        EvalCounts { rom_solves: self.solves.load(Ordering::Relaxed), ..EvalCounts::default() }
    }
}
