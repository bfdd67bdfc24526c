//! Concrete problems and model providers.

pub mod analytic;
pub mod burgers;
pub mod exact_wrapper;
pub mod rom;
pub mod snapshots;
pub mod synthetic;

pub use analytic::{make_analytic_suite, p3_reference, AnalyticKind, AnalyticProblem};
pub use burgers::{BurgersParams, Fom1D, Tridiagonal};
pub use exact_wrapper::{exact_wrapper, ExactModel, ExactWrapper};
pub use rom::{rom_provider, RomModel, RomProvider, RomSettings};
pub use snapshots::{SnapshotError, SnapshotKind, SnapshotRegistry};
pub use synthetic::{synthetic_provider, SyntheticModel, SyntheticProvider};
