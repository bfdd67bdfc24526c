//! Batch runner: one TOML configuration in, one history file and a summary out.

pub mod config;
pub mod history;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use tunable_sqp::problem::lagrangian_gradient_norm;
use tunable_sqp::providers::{AnalyticKind, AnalyticProblem, ExactWrapper, Fom1D, RomProvider, SyntheticProvider};
use tunable_sqp::{solve_exact, solve_inexact, EvalCounts, ModelProvider, ProblemFunctions, Record, SolveStatus};

pub use config::{ConfigError, RunConfig};
pub use history::{compare, Comparison, History, ParseError, Row, Summary};

/// Exit codes of the `tsqp` binary.
pub mod exit {
    pub const CONVERGED: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("cannot write {0}: {1}")]
    Io(String, std::io::Error),
}

/// Result of one configured run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: SolveStatus,
    pub history: History,
}

struct Raw {
    status: SolveStatus,
    records: Vec<Record>,
    x: Vec<f64>,
    lambda: Vec<f64>,
    iterations: usize,
    counts: EvalCounts,
    max_basis: usize,
}

fn finish<P: ProblemFunctions<f64> + ?Sized>(cfg: &RunConfig, problem: &P, raw: Raw) -> Result<Outcome, RunError> {
    // Counts are captured before the final true evaluations below.
    let setup = |e: tunable_sqp::EvalError| RunError::Setup(format!("final evaluation: {e}"));
    let (f, c) = problem.values(&raw.x).map_err(setup)?;
    let (g, j) = problem.derivatives(&raw.x).map_err(setup)?;
    let lambda = if raw.lambda.len() == c.len() { raw.lambda } else { vec![0.0; c.len()] };
    let summary = Summary {
        status: raw.status.name().to_string(),
        iterations: raw.iterations,
        fom_evals: raw.counts.full_order_evals(),
        rom_evals: raw.counts.model_side_evals(),
        objective: f,
        feasibility: c.iter().map(|v| v.abs()).sum(),
        fonc: lagrangian_gradient_norm(&g, &j, &lambda),
        max_basis: raw.max_basis,
    };
    let history = History {
        parameters: cfg.parameters_toml(),
        rows: raw.records.iter().map(Row::from_record).collect(),
        summary,
    };
    Ok(Outcome { status: raw.status, history })
}

fn run_with<P, Pr>(cfg: &RunConfig, problem: &Arc<P>, x0: &[f64], provider: Option<Pr>) -> Result<Outcome, RunError>
where
    P: ProblemFunctions<f64> + ?Sized,
    Pr: ModelProvider<f64>,
{
    let raw = match provider {
        None => {
            let rep = solve_exact(problem.as_ref(), x0, &cfg.solver_config());
            Raw {
                status: rep.status,
                iterations: rep.state.k,
                counts: problem.counts(),
                records: rep.history,
                x: rep.state.x,
                lambda: rep.state.lambda,
                max_basis: 0,
            }
        }
        Some(mut prov) => {
            let rep = solve_inexact(&mut prov, problem.as_ref(), x0, &cfg.ledger(), &cfg.inexact_config());
            Raw {
                status: rep.status,
                iterations: rep.state.k,
                counts: rep.state.counts,
                records: rep.history,
                x: rep.state.x,
                lambda: rep.state.lambda,
                max_basis: rep.max_basis_size,
            }
        }
    };
    finish(cfg, problem.as_ref(), raw)
}

fn run_problem<P: ProblemFunctions<f64> + 'static>(cfg: &RunConfig, problem: Arc<P>, x0: &[f64]) -> Result<Outcome, RunError> {
    use config::{Method, ProviderKind};
    match (cfg.solver.method, cfg.solver.provider) {
        (Method::Exact, _) => run_with::<P, ExactWrapper<P>>(cfg, &problem, x0, None),
        (Method::Inexact, ProviderKind::ExactWrapper) => {
            run_with(cfg, &problem, x0, Some(ExactWrapper::new(Arc::clone(&problem))))
        }
        (Method::Inexact, ProviderKind::Synthetic) => {
            let i = &cfg.inexact;
            let prov = SyntheticProvider::new(Arc::clone(&problem), i.synthetic_eps0, i.synthetic_decay, cfg.seed)
                .map_err(|e| RunError::Setup(e.to_string()))?;
            run_with(cfg, &problem, x0, Some(prov))
        }
        (Method::Inexact, ProviderKind::Rom) => {
            Err(ConfigError::Invalid("the rom provider needs problem.kind = \"burgers\"".into()).into())
        }
    }
}

/// Runs a validated configuration without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, RunError> {
    use config::{Method, ProblemKind, ProviderKind};
    cfg.validate()?;
    let analytic = |kind| {
        let p = Arc::new(AnalyticProblem::<f64>::new(kind));
        let x0 = cfg.problem.x0.clone().unwrap_or_else(|| p.x0().to_vec());
        run_problem(cfg, p, &x0)
    };
    match cfg.problem.kind {
        ProblemKind::P1 => analytic(AnalyticKind::P1),
        ProblemKind::P2 => analytic(AnalyticKind::P2),
        ProblemKind::P3 => analytic(AnalyticKind::P3),
        ProblemKind::Burgers => {
            let fom = Arc::new(Fom1D::new(cfg.problem.burgers.params()).map_err(RunError::Setup)?);
            let x0 = cfg.problem.x0.clone().unwrap_or_else(|| vec![0.0; fom.control_dim()]);
            if cfg.solver.method == Method::Inexact && cfg.solver.provider == ProviderKind::Rom {
                let prov = RomProvider::new(Arc::clone(&fom), cfg.rom_settings());
                run_with(cfg, &fom, &x0, Some(prov))
            } else {
                run_problem(cfg, fom, &x0)
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io(path.display().to_string(), e))
}

/// Loads, runs and writes outputs; returns the process exit code.
///
/// Configuration errors are reported before anything is written.
pub fn run(config_path: &Path) -> i32 {
    let cfg = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return exit::SOLVER;
        }
    };
    let rendered = outcome.history.render();
    let summary = outcome.history.summary.to_string();
    let written = (|| {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        let io = |e| RunError::Io("stdout".into(), e);
        match &cfg.output.history {
            Some(p) => {
                write_file(p, &rendered)?;
                out.write_all(summary.as_bytes()).map_err(io)?;
            }
            None => out.write_all(rendered.as_bytes()).map_err(io)?,
        }
        if let Some(p) = &cfg.output.summary {
            write_file(p, &summary)?;
        }
        Ok::<_, RunError>(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e}");
        return exit::IO;
    }
    if outcome.status == SolveStatus::Converged {
        exit::CONVERGED
    } else {
        eprintln!("solver stopped: {}", outcome.status.name());
        exit::SOLVER
    }
}

/// `tsqp compare`: prints the table and returns the exit code.
pub fn run_compare(a: &Path, b: &Path) -> i32 {
    match (History::read(a), History::read(b)) {
        (Ok(ha), Ok(hb)) => {
            print!("{}", compare(&ha, &hb));
            exit::CONVERGED
        }
        (Err(e), _) => {
            eprintln!("error: {}: {e}", a.display());
            exit::CONFIG
        }
        (_, Err(e)) => {
            eprintln!("error: {}: {e}", b.display());
            exit::CONFIG
        }
    }
}
