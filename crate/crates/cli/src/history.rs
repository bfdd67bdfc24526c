//! History files and their comparison.
//!
//! Layout:
//!
//! ```text
//! # tsqp history v1
//! # <effective parameters as TOML, one comment line each>
//! k,model_fonc,model_feas,true_fonc,merit,rho,alpha,fom_evals,rom_evals,basis_size
//! <one row per outer iterate>
//! # status = Converged
//! # <remaining summary keys>
//! ```
//!
//! Reals are written with 17 significant digits; `true_fonc` is empty unless
//! the run was instrumented.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use tunable_sqp::Record;

pub const MAGIC: &str = "# tsqp history v1";
pub const COLUMNS: &str = "k,model_fonc,model_feas,true_fonc,merit,rho,alpha,fom_evals,rom_evals,basis_size";
const NCOLS: usize = 10;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Table-style run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub status: String,
    pub iterations: usize,
    pub fom_evals: usize,
    pub rom_evals: usize,
    pub objective: f64,
    pub feasibility: f64,
    pub fonc: f64,
    pub max_basis: usize,
}

const SUMMARY_KEYS: [&str; 8] =
    ["status", "iterations", "fom_evals", "rom_evals", "objective", "feasibility", "fonc", "max_basis"];

impl Summary {
    fn entries(&self) -> [(&'static str, String); 8] {
        [
            ("status", self.status.clone()),
            ("iterations", self.iterations.to_string()),
            ("fom_evals", self.fom_evals.to_string()),
            ("rom_evals", self.rom_evals.to_string()),
            ("objective", real(self.objective)),
            ("feasibility", real(self.feasibility)),
            ("fonc", real(self.fonc)),
            ("max_basis", self.max_basis.to_string()),
        ]
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k:<12} {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub k: usize,
    pub model_fonc: f64,
    pub model_feas: f64,
    pub true_fonc: Option<f64>,
    pub merit: f64,
    pub rho: f64,
    pub alpha: f64,
    pub fom_evals: usize,
    pub rom_evals: usize,
    pub basis_size: usize,
}

impl Row {
    pub fn from_record(r: &Record) -> Self {
        Self {
            k: r.k,
            model_fonc: r.stationarity,
            model_feas: r.feasibility,
            true_fonc: r.true_stationarity,
            merit: r.merit,
            rho: r.rho,
            alpha: r.alpha,
            fom_evals: r.counts.full_order_evals(),
            rom_evals: r.counts.model_side_evals(),
            basis_size: r.basis_size,
        }
    }

    fn to_csv(&self) -> String {
        let t = self.true_fonc.map(real).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.k,
            real(self.model_fonc),
            real(self.model_feas),
            t,
            real(self.merit),
            real(self.rho),
            real(self.alpha),
            self.fom_evals,
            self.rom_evals,
            self.basis_size
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    /// Parameter block, without the comment markers.
    pub parameters: String,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

impl History {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for l in self.parameters.lines() {
            out.push_str(if l.is_empty() { "#" } else { "# " });
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(COLUMNS);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        for (k, v) in self.summary.entries() {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let err = |line: usize, msg: String| ParseError::Line { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(err(1, format!("expected `{MAGIC}`"))),
        }
        let mut parameters = String::new();
        let mut last = 1;
        let mut saw_columns = false;
        for (n, l) in lines.by_ref() {
            last = n;
            if l == COLUMNS {
                saw_columns = true;
                break;
            }
            let Some(rest) = l.strip_prefix('#') else {
                return Err(err(n, "expected a parameter comment or the column header".into()));
            };
            parameters.push_str(rest.strip_prefix(' ').unwrap_or(rest));
            parameters.push('\n');
        }
        if !saw_columns {
            return Err(err(last + 1, "missing column header".into()));
        }
        let mut rows = Vec::new();
        let mut trailer: Vec<(usize, String, String)> = Vec::new();
        for (n, l) in lines {
            last = n;
            if let Some(rest) = l.strip_prefix("# ") {
                let (k, v) = rest.split_once(" = ").ok_or_else(|| err(n, "expected `# key = value`".into()))?;
                trailer.push((n, k.to_string(), v.to_string()));
                continue;
            }
            if !trailer.is_empty() {
                return Err(err(n, "data row after the summary".into()));
            }
            rows.push(parse_row(l).map_err(|m| err(n, m))?);
        }
        let get = |key: &str| -> Result<(usize, &str), ParseError> {
            trailer
                .iter()
                .find(|(_, k, _)| k == key)
                .map(|(n, _, v)| (*n, v.as_str()))
                .ok_or_else(|| err(last + 1, format!("missing summary key `{key}`")))
        };
        for (n, k, _) in &trailer {
            if !SUMMARY_KEYS.contains(&k.as_str()) {
                return Err(err(*n, format!("unknown summary key `{k}`")));
            }
        }
        let int = |key: &str| -> Result<usize, ParseError> {
            let (n, v) = get(key)?;
            v.parse().map_err(|e| err(n, format!("bad {key}: {e}")))
        };
        let float = |key: &str| -> Result<f64, ParseError> {
            let (n, v) = get(key)?;
            v.parse().map_err(|e| err(n, format!("bad {key}: {e}")))
        };
        let summary = Summary {
            status: get("status")?.1.to_string(),
            iterations: int("iterations")?,
            fom_evals: int("fom_evals")?,
            rom_evals: int("rom_evals")?,
            objective: float("objective")?,
            feasibility: float("feasibility")?,
            fonc: float("fonc")?,
            max_basis: int("max_basis")?,
        };
        Ok(Self { parameters, rows, summary })
    }

    pub fn read(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError::Io(path.display().to_string(), e))?;
        Self::parse(&text)
    }
}

fn parse_row(line: &str) -> Result<Row, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != NCOLS {
        return Err(format!("expected {NCOLS} fields, found {}", fields.len()));
    }
    let f = |i: usize| fields[i].parse::<f64>().map_err(|e| format!("column {}: {e}", i + 1));
    let u = |i: usize| fields[i].parse::<usize>().map_err(|e| format!("column {}: {e}", i + 1));
    Ok(Row {
        k: u(0)?,
        model_fonc: f(1)?,
        model_feas: f(2)?,
        true_fonc: if fields[3].is_empty() { None } else { Some(f(3)?) },
        merit: f(4)?,
        rho: f(5)?,
        alpha: f(6)?,
        fom_evals: u(7)?,
        rom_evals: u(8)?,
        basis_size: u(9)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fewer {
    A,
    B,
    Tie,
}

/// Side-by-side view of two runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: Summary,
    pub b: Summary,
    pub fewer_fom_evals: Fewer,
}

pub fn compare(a: &History, b: &History) -> Comparison {
    let fewer = match a.summary.fom_evals.cmp(&b.summary.fom_evals) {
        std::cmp::Ordering::Less => Fewer::A,
        std::cmp::Ordering::Greater => Fewer::B,
        std::cmp::Ordering::Equal => Fewer::Tie,
    };
    Comparison { a: a.summary.clone(), b: b.summary.clone(), fewer_fom_evals: fewer }
}

impl Comparison {
    /// `(name, a, b, b - a)` for the integer metrics.
    pub fn count_deltas(&self) -> [(&'static str, usize, usize, i64); 4] {
        let d = |x: usize, y: usize| y as i64 - x as i64;
        [
            ("iterations", self.a.iterations, self.b.iterations, d(self.a.iterations, self.b.iterations)),
            ("fom_evals", self.a.fom_evals, self.b.fom_evals, d(self.a.fom_evals, self.b.fom_evals)),
            ("rom_evals", self.a.rom_evals, self.b.rom_evals, d(self.a.rom_evals, self.b.rom_evals)),
            ("max_basis", self.a.max_basis, self.b.max_basis, d(self.a.max_basis, self.b.max_basis)),
        ]
    }

    pub fn residual_deltas(&self) -> [(&'static str, f64, f64, f64); 3] {
        [
            ("objective", self.a.objective, self.b.objective, self.b.objective - self.a.objective),
            ("feasibility", self.a.feasibility, self.b.feasibility, self.b.feasibility - self.a.feasibility),
            ("fonc", self.a.fonc, self.b.fonc, self.b.fonc - self.a.fonc),
        ]
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>24} {:>24} {:>24}", "metric", "a", "b", "b - a")?;
        writeln!(f, "{:<12} {:>24} {:>24} {:>24}", "status", self.a.status, self.b.status, "")?;
        for (name, a, b, d) in self.count_deltas() {
            writeln!(f, "{name:<12} {a:>24} {b:>24} {d:>24}")?;
        }
        for (name, a, b, d) in self.residual_deltas() {
            writeln!(f, "{name:<12} {:>24} {:>24} {:>24}", real(a), real(b), real(d))?;
        }
        let who = match self.fewer_fom_evals {
            Fewer::A => "a",
            Fewer::B => "b",
            Fewer::Tie => "neither (equal)",
        };
        writeln!(f, "fewer FOM evaluations: {who}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> History {
        History {
            parameters: "seed = 0\n\n[solver]\nmethod = \"exact\"\n".into(),
            rows: vec![
                Row {
                    k: 0,
                    model_fonc: 1.5,
                    model_feas: 2.0,
                    true_fonc: None,
                    merit: 4.2,
                    rho: 2.1,
                    alpha: 1.0,
                    fom_evals: 2,
                    rom_evals: 0,
                    basis_size: 0,
                },
                Row {
                    k: 1,
                    model_fonc: 1e-17,
                    model_feas: 0.0,
                    true_fonc: Some(3e-17),
                    merit: 1.0,
                    rho: 2.1,
                    alpha: 0.0,
                    fom_evals: 4,
                    rom_evals: 7,
                    basis_size: 3,
                },
            ],
            summary: Summary {
                status: "Converged".into(),
                iterations: 1,
                fom_evals: 4,
                rom_evals: 7,
                objective: 1.0,
                feasibility: 0.0,
                fonc: 1e-17,
                max_basis: 3,
            },
        }
    }

    #[test]
    fn render_parse_round_trip() {
        let h = sample();
        let text = h.render();
        assert!(text.starts_with(MAGIC));
        assert!(text.contains("\n1,1.0000000000000001e-17,0.0000000000000000e0,3.0000000000000001e-17,"));
        assert_eq!(History::parse(&text).unwrap(), h);
    }

    #[test]
    fn identical_inputs_have_zero_deltas() {
        let h = sample();
        let c = compare(&h, &h);
        assert!(c.count_deltas().iter().all(|d| d.3 == 0));
        assert!(c.residual_deltas().iter().all(|d| d.3 == 0.0));
        assert_eq!(c.fewer_fom_evals, Fewer::Tie);
    }

    #[test]
    fn fewer_fom_evaluations_are_flagged() {
        let a = sample();
        let mut b = sample();
        b.summary.fom_evals = 3;
        let c = compare(&a, &b);
        assert_eq!(c.fewer_fom_evals, Fewer::B);
        assert!(c.to_string().ends_with("fewer FOM evaluations: b\n"));
        assert_eq!(compare(&b, &a).fewer_fom_evals, Fewer::A);
    }

    #[test]
    fn truncation_errors_name_the_line() {
        let text = sample().render();
        let lines: Vec<&str> = text.lines().collect();
        let row_line = lines.iter().position(|l| l.starts_with("1,")).unwrap();
        // cut the last data row in half
        let mut cut: Vec<String> = lines[..row_line].iter().map(|s| s.to_string()).collect();
        cut.push(lines[row_line][..20].to_string());
        match History::parse(&cut.join("\n")) {
            Err(ParseError::Line { line, .. }) => assert_eq!(line, row_line + 1),
            other => panic!("{other:?}"),
        }
        // drop the summary block
        let head = lines[..=row_line].join("\n");
        match History::parse(&head) {
            Err(ParseError::Line { line, msg }) => {
                assert_eq!(line, row_line + 2);
                assert!(msg.contains("status"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(History::parse(""), Err(ParseError::Line { line: 1, .. })));
    }
}
