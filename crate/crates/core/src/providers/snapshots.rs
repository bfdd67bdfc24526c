//! Snapshot registry and its text format.
//!
//! One vector per line: `<kind> <index> v_1 v_2 ...` with `kind` one of
//! `state`, `adjoint`, `sensitivity` and every value in exponent notation with
//! 17 significant digits, so a write/read round trip is exact. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::linalg::{orthonormalize, DenseMatrix};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    State,
    Adjoint,
    Sensitivity,
}

impl SnapshotKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::State => "state",
            Self::Adjoint => "adjoint",
            Self::Sensitivity => "sensitivity",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "state" => Some(Self::State),
            "adjoint" => Some(Self::Adjoint),
            "sensitivity" => Some(Self::Sensitivity),
            _ => None,
        }
    }
}

/// States and adjoints from every visited point; sensitivities from the latest build only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotRegistry {
    pub states: Vec<Vec<f64>>,
    pub adjoints: Vec<Vec<f64>>,
    pub sensitivities: Vec<Vec<f64>>,
}

impl SnapshotRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_state(&mut self, y: Vec<f64>) {
        self.states.push(y);
    }

    pub fn push_adjoint(&mut self, p: Vec<f64>) {
        self.adjoints.push(p);
    }

    pub fn set_sensitivities(&mut self, cols: Vec<Vec<f64>>) {
        self.sensitivities = cols;
    }

    pub fn len(&self) -> usize {
        self.states.len() + self.adjoints.len() + self.sensitivities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Two-stage basis: each block orthonormalized on its own, then the
    /// concatenation orthonormalized again.
    pub fn basis(&self, drop_tol: f64) -> DenseMatrix<f64> {
        let mut all = Vec::new();
        for block in [&self.states, &self.adjoints, &self.sensitivities] {
            if !block.is_empty() {
                all.extend(orthonormalize(block, drop_tol).columns());
            }
        }
        orthonormalize(&all, drop_tol)
    }

    fn blocks(&self) -> [(SnapshotKind, &Vec<Vec<f64>>); 3] {
        [
            (SnapshotKind::State, &self.states),
            (SnapshotKind::Adjoint, &self.adjoints),
            (SnapshotKind::Sensitivity, &self.sensitivities),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (kind, block) in self.blocks() {
            for (i, v) in block.iter().enumerate() {
                out.push_str(kind.name());
                let _ = write!(out, " {i}");
                for x in v {
                    let _ = write!(out, " {x:.16e}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SnapshotError> {
        let mut reg = Self::new();
        let mut width: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |msg: String| SnapshotError::Parse { line, msg };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let kind_str = parts.next().unwrap_or_default();
            let kind = SnapshotKind::parse(kind_str).ok_or_else(|| err(format!("unknown kind `{kind_str}`")))?;
            let index: usize = parts
                .next()
                .ok_or_else(|| err("missing index".into()))?
                .parse()
                .map_err(|e| err(format!("bad index: {e}")))?;
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|e| err(format!("bad value `{p}`: {e}"))))
                .collect::<Result<_, _>>()?;
            if values.is_empty() {
                return Err(err("empty vector".into()));
            }
            match width {
                Some(w) if w != values.len() => {
                    return Err(err(format!("vector length {} differs from {w}", values.len())));
                }
                _ => width = Some(values.len()),
            }
            let block = match kind {
                SnapshotKind::State => &mut reg.states,
                SnapshotKind::Adjoint => &mut reg.adjoints,
                SnapshotKind::Sensitivity => &mut reg.sensitivities,
            };
            if index != block.len() {
                return Err(err(format!("expected {} index {}, found {index}", kind.name(), block.len())));
            }
            block.push(values);
        }
        Ok(reg)
    }

    pub fn write(&self, path: &Path) -> Result<(), SnapshotError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, SnapshotError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_is_one_vector_per_line() {
        let mut r = SnapshotRegistry::new();
        r.push_state(vec![1.0, -0.5]);
        r.push_adjoint(vec![0.25, 3.0]);
        assert_eq!(
            r.to_text(),
            "state 0 1.0000000000000000e0 -5.0000000000000000e-1\nadjoint 0 2.5000000000000000e-1 3.0000000000000000e0\n"
        );
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "state 0 1.0 2.0\n\nstate 1 1.0 x\n";
        match SnapshotRegistry::from_text(text) {
            Err(SnapshotError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(SnapshotRegistry::from_text("state 0 1.0\nstate 1 1.0 2.0\n").is_err());
        assert!(SnapshotRegistry::from_text("velocity 0 1.0\n").is_err());
        assert!(SnapshotRegistry::from_text("state 1 1.0\n").is_err());
    }

    #[test]
    fn two_stage_basis_is_orthonormal_and_spans_snapshots() {
        let mut r = SnapshotRegistry::new();
        r.push_state(vec![1.0, 1.0, 0.0, 0.0]);
        r.push_state(vec![2.0, 2.0, 0.0, 0.0]);
        r.push_adjoint(vec![1.0, 0.0, 1.0, 0.0]);
        r.set_sensitivities(vec![vec![0.0, 0.0, 0.0, 2.0]]);
        let v = r.basis(1e-10);
        assert_eq!(v.cols(), 3);
        let g = v.transpose().matmul(&v);
        assert!(g.sub(&DenseMatrix::identity(3)).max_abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(
            states in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 5), 0..4),
            adjoints in prop::collection::vec(prop::collection::vec(-1e-8f64..1e-8, 5), 0..3),
            sens in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 5), 0..3),
        ) {
            let reg = SnapshotRegistry { states, adjoints, sensitivities: sens };
            let back = SnapshotRegistry::from_text(&reg.to_text()).unwrap();
            prop_assert_eq!(back, reg);
        }
    }
}
