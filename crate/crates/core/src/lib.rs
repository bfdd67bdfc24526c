//! Line-search SQP with an l1 merit function, on exact functions or on models
//! of tunable accuracy.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom fix the scalar to `f64` for everyday use.

pub mod linalg;
pub mod merit;
pub mod model_framework;
pub mod problem;
pub mod providers;
pub mod report;
pub mod scalar;
pub mod sqp_exact;
pub mod sqp_inexact;

pub use linalg::{DenseMatrix, KktSolution, LinalgError};
pub use merit::{LineSearchParams, PenaltyState};
pub use model_framework::{
    BuildRequest, ModelProvider, ProviderError, RelThresholds, ToleranceLedger, TunableModel,
};
pub use problem::{EvalCounts, EvalError, ProblemFunctions};
pub use report::{IterateState, IterationRecord, SolveStatus};
pub use scalar::Real;
pub use sqp_exact::{solve_exact, HessianStrategy, KktMethod, SolveReport, SolverConfig};
pub use sqp_inexact::{solve_inexact, InexactConfig, InexactReport, InnerExit, OuterRecord};


pub type Matrix = DenseMatrix<f64>;
pub type Config = SolverConfig<f64>;
pub type Report = SolveReport<f64>;
pub type Ledger = ToleranceLedger<f64>;
pub type State = IterateState<f64>;
pub type Record = IterationRecord<f64>;
pub type InexactSettings = InexactConfig<f64>;

