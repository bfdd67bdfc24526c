//! Run configuration, read from TOML.
//!
//! Every key is optional and falls back to the documented default; unknown
//! keys are rejected. Relative output paths are resolved against the directory
//! of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tunable_sqp::providers::{BurgersParams, RomSettings};
use tunable_sqp::{
    HessianStrategy, InexactConfig, KktMethod, LineSearchParams, RelThresholds, SolverConfig, ToleranceLedger,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    P1,
    P2,
    P3,
    Burgers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Exact,
    Inexact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    ExactWrapper,
    Synthetic,
    Rom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianKind {
    #[default]
    Problem,
    Bfgs,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KktKind {
    #[default]
    Projected,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurgersSection {
    pub n: usize,
    pub nu: f64,
    pub n_u: usize,
    pub bump_width: f64,
    pub source_scale: f64,
    pub omega_reg: f64,
    pub y_left: f64,
    pub y_right: f64,
    pub target_amp: f64,
    pub t_d: f64,
}

impl Default for BurgersSection {
    fn default() -> Self {
        let p = BurgersParams::default();
        Self {
            n: p.n,
            nu: p.nu,
            n_u: p.n_u,
            bump_width: p.bump_width,
            source_scale: p.source_scale,
            omega_reg: p.omega_reg,
            y_left: p.y_left,
            y_right: p.y_right,
            target_amp: p.target_amp,
            t_d: p.t_d,
        }
    }
}

impl BurgersSection {
    pub fn params(&self) -> BurgersParams {
        BurgersParams {
            n: self.n,
            nu: self.nu,
            n_u: self.n_u,
            bump_width: self.bump_width,
            source_scale: self.source_scale,
            omega_reg: self.omega_reg,
            y_left: self.y_left,
            y_right: self.y_right,
            target_amp: self.target_amp,
            t_d: self.t_d,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    /// Starting point; the problem's own default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub burgers: BurgersSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: Method,
    pub provider: ProviderKind,
    pub hessian: HessianKind,
    pub kkt: KktKind,
    pub tol_f: f64,
    pub tol_c: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
    pub rho0: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::<f64>::default();
        Self {
            method: Method::default(),
            provider: ProviderKind::default(),
            hessian: HessianKind::default(),
            kkt: KktKind::default(),
            tol_f: s.tol_f,
            tol_c: s.tol_c,
            max_iter: s.max_iter,
            c1: s.line_search.c1,
            beta1: s.line_search.beta1,
            beta2: s.line_search.beta2,
            sigma: s.sigma,
            rho0: s.rho0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InexactSection {
    pub omega: f64,
    pub a1: f64,
    pub a2: f64,
    pub r0: f64,
    pub gamma: f64,
    pub tau0: f64,
    pub tau_fg: f64,
    pub tau_cg: f64,
    pub tau_c: f64,
    pub max_refinements: usize,
    pub extra_backsteps: usize,
    pub max_inner: usize,
    pub instrument: bool,
    pub synthetic_eps0: f64,
    pub synthetic_decay: f64,
    pub rom_drop_tol: f64,
    pub rom_max_basis: usize,
}

impl Default for InexactSection {
    fn default() -> Self {
        let l = ToleranceLedger::<f64>::default();
        let c = InexactConfig::<f64>::default();
        let r = RomSettings::default();
        Self {
            omega: l.omega,
            a1: l.a1,
            a2: l.a2,
            r0: l.r0,
            gamma: l.gamma,
            tau0: l.tau_current,
            tau_fg: l.thresholds.grad,
            tau_cg: l.thresholds.jac,
            tau_c: l.thresholds.cons,
            max_refinements: c.max_refinements,
            extra_backsteps: c.extra_backsteps,
            max_inner: c.max_inner,
            instrument: c.instrument,
            synthetic_eps0: tunable_sqp::providers::synthetic::SYNTHETIC_EPS0,
            synthetic_decay: 0.5,
            rom_drop_tol: r.drop_tol,
            rom_max_basis: r.max_basis,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// History file; printed to stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    /// Summary file, written in addition to stdout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed of the synthetic provider's perturbations.
    pub seed: u64,
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub inexact: InexactSection,
    pub output: OutputSection,
}

/// Everything except output paths: the part of a configuration that decides the run.
#[derive(Serialize)]
struct Parameters<'a> {
    seed: u64,
    problem: &'a ProblemSection,
    solver: &'a SolverSection,
    inexact: &'a InexactSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative output paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.output.history, &mut cfg.output.summary].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Effective parameters as TOML, output paths excluded.
    pub fn parameters_toml(&self) -> String {
        let view = Parameters { seed: self.seed, problem: &self.problem, solver: &self.solver, inexact: &self.inexact };
        toml::to_string(&view).expect("configuration serializes")
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        let s = &self.solver;
        SolverConfig {
            tol_f: s.tol_f,
            tol_c: s.tol_c,
            max_iter: s.max_iter,
            line_search: LineSearchParams { c1: s.c1, beta1: s.beta1, beta2: s.beta2, ..LineSearchParams::default() },
            sigma: s.sigma,
            rho0: s.rho0,
            hessian: match s.hessian {
                HessianKind::Problem => HessianStrategy::ProblemSupplied,
                HessianKind::Bfgs => HessianStrategy::DampedBfgs,
                HessianKind::Identity => HessianStrategy::Identity,
            },
            kkt: match s.kkt {
                KktKind::Projected => KktMethod::Projected,
                KktKind::Dense => KktMethod::Dense,
            },
            ..SolverConfig::default()
        }
    }

    pub fn ledger(&self) -> ToleranceLedger<f64> {
        let i = &self.inexact;
        ToleranceLedger {
            omega: i.omega,
            a1: i.a1,
            a2: i.a2,
            r0: i.r0,
            gamma: i.gamma,
            tau_current: i.tau0,
            thresholds: RelThresholds { grad: i.tau_fg, jac: i.tau_cg, cons: i.tau_c },
        }
    }

    pub fn inexact_config(&self) -> InexactConfig<f64> {
        let i = &self.inexact;
        InexactConfig {
            base: self.solver_config(),
            max_refinements: i.max_refinements,
            extra_backsteps: i.extra_backsteps,
            max_inner: i.max_inner,
            instrument: i.instrument,
        }
    }

    pub fn rom_settings(&self) -> RomSettings {
        RomSettings { drop_tol: self.inexact.rom_drop_tol, max_basis: self.inexact.rom_max_basis }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.solver_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.solver.max_iter == 0 {
            return bad("solver.max_iter must be at least 1".into());
        }
        if self.solver.method == Method::Inexact {
            self.ledger().validate().map_err(|e| ConfigError::Invalid(format!("inexact: {e}")))?;
            let i = &self.inexact;
            if i.max_inner == 0 {
                return bad("inexact.max_inner must be at least 1".into());
            }
            if !(i.synthetic_decay > 0.0 && i.synthetic_decay < 1.0) {
                return bad("inexact.synthetic_decay must lie in (0,1)".into());
            }
            if !(i.synthetic_eps0 >= 0.0 && i.synthetic_eps0.is_finite()) {
                return bad("inexact.synthetic_eps0 must be finite and nonnegative".into());
            }
            if !(i.rom_drop_tol > 0.0 && i.rom_drop_tol < 1.0) {
                return bad("inexact.rom_drop_tol must lie in (0,1)".into());
            }
            if i.rom_max_basis == 0 {
                return bad("inexact.rom_max_basis must be at least 1".into());
            }
            if self.solver.provider == ProviderKind::Rom && self.problem.kind != ProblemKind::Burgers {
                return bad("the rom provider needs problem.kind = \"burgers\"".into());
            }
        }
        if self.problem.kind == ProblemKind::Burgers {
            self.problem.burgers.params().validate().map_err(|e| ConfigError::Invalid(format!("burgers: {e}")))?;
        }
        if let Some(x0) = &self.problem.x0 {
            let n = match self.problem.kind {
                ProblemKind::P1 | ProblemKind::P2 => 2,
                ProblemKind::P3 => 10,
                ProblemKind::Burgers => self.problem.burgers.n_u,
            };
            if x0.len() != n {
                return bad(format!("problem.x0 has length {}, expected {n}", x0.len()));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                return bad("problem.x0 must be finite".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_documented_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.solver.c1, 1e-4);
        assert_eq!((cfg.solver.beta1, cfg.solver.beta2), (0.5, 0.5));
        assert_eq!((cfg.solver.sigma, cfg.solver.rho0), (0.1, 1.0));
        let i = &cfg.inexact;
        assert_eq!((i.omega, i.a1, i.a2, i.r0, i.gamma, i.tau0), (0.9, 0.5, 1.0, 1.0, 0.5, 1e-2));
        assert_eq!((i.tau_fg, i.tau_cg, i.tau_c), (0.5, 0.5, 0.5));
        assert_eq!((cfg.solver.tol_f, cfg.solver.tol_c), (1e-6, 1e-6));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("[solver]\ntolerance = 1.0\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml("speed = 3\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for text in [
            "[solver]\nc1 = 1.5\n",
            "[solver]\nbeta1 = 0.7\nbeta2 = 0.6\n",
            "[solver]\ntol_f = 0.0\n",
            "[solver]\nmethod = \"inexact\"\n[inexact]\nomega = 1.5\n",
            "[solver]\nmethod = \"inexact\"\nprovider = \"rom\"\n",
            "[problem]\nx0 = [1.0]\n",
            "[problem]\nkind = \"burgers\"\n[problem.burgers]\nn_u = 3\n",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(ConfigError::Invalid(_))), "{text}");
        }
    }

    #[test]
    fn serialized_defaults_parse_back() {
        let mut cfg = RunConfig::default();
        cfg.problem.x0 = Some(vec![0.5, 0.25]);
        cfg.solver.method = Method::Inexact;
        cfg.solver.provider = ProviderKind::Synthetic;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
