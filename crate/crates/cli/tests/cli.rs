use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsqp::{compare, execute, history::Fewer, History, ParseError, RunConfig};

fn tsqp(args: &[&Path], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tsqp"));
    cmd.args(args.iter().map(|p| p.as_os_str()));
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_file(dir: &Path, name: &str, body: &str, threads: Option<&str>) -> (Output, String) {
    let cfg = write_config(dir, name, body);
    let out = tsqp(&[Path::new("run"), &cfg], threads);
    let hist = dir.join(format!("{name}.csv"));
    (out, fs::read_to_string(hist).unwrap_or_default())
}

const BURGERS_ROM: &str = "[problem]\nkind = \"burgers\"\n[solver]\nmethod = \"inexact\"\nprovider = \"rom\"\n";

#[test]
fn quadratic_problem_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (out, text) = run_file(dir.path(), "p1.toml", "[output]\nhistory = \"p1.toml.csv\"\n", None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("status       Converged\n"));
    let h = History::parse(&text).unwrap();
    assert_eq!(h.summary.status, "Converged");
    assert!((1..=3).contains(&h.summary.iterations));
    assert!(h.summary.feasibility <= 1e-8);
    assert_eq!(h.rows.len(), h.summary.iterations + 1);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{BURGERS_ROM}[output]\nhistory = \"a.toml.csv\"\n");
    let (o1, a1) = run_file(dir.path(), "a.toml", &body, Some("1"));
    assert_eq!(o1.status.code(), Some(0), "{}", String::from_utf8_lossy(&o1.stderr));
    let (_, a2) = run_file(dir.path(), "a.toml", &body, Some("4"));
    let (_, a3) = run_file(dir.path(), "a.toml", &body, None);
    assert!(!a1.is_empty());
    assert_eq!(a1, a2);
    assert_eq!(a1, a3);

    let syn = "seed = 7\n[problem]\nkind = \"p3\"\n[solver]\nmethod = \"inexact\"\nprovider = \"synthetic\"\n\
               [output]\nhistory = \"s.toml.csv\"\n";
    let (_, s1) = run_file(dir.path(), "s.toml", syn, Some("1"));
    let (_, s2) = run_file(dir.path(), "s.toml", syn, Some("3"));
    assert!(!s1.is_empty());
    assert_eq!(s1, s2);
}

#[test]
fn malformed_configuration_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    for (i, body) in [
        "[solver\nmethod = \"exact\"\n",
        "[solver]\nmethod = \"sideways\"\n",
        "[solver]\nc1 = 2.0\n",
        "[solver]\nmethod = \"inexact\"\nprovider = \"rom\"\n",
    ]
    .iter()
    .enumerate()
    {
        let name = format!("bad{i}.toml");
        let body = format!("{body}[output]\nhistory = \"out.csv\"\nsummary = \"out.txt\"\n");
        // the [output] table lands after the broken part; nothing may be written either way
        let (out, _) = run_file(dir.path(), &name, &body, None);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
        assert!(!dir.path().join("out.csv").exists());
        assert!(!dir.path().join("out.txt").exists());
    }
    let missing = dir.path().join("absent.toml");
    assert_eq!(tsqp(&[Path::new("run"), &missing], None).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3_with_status() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[problem]\nkind = \"p3\"\n[solver]\nmax_iter = 1\n[output]\nhistory = \"f.toml.csv\"\n";
    let (out, text) = run_file(dir.path(), "f.toml", body, None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MaxIter"));
    assert_eq!(History::parse(&text).unwrap().summary.status, "MaxIter");
}

#[test]
fn compare_identical_files_reports_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let (_, text) = run_file(dir.path(), "p2.toml", "[problem]\nkind = \"p2\"\n[output]\nhistory = \"p2.toml.csv\"\n", None);
    let h = History::parse(&text).unwrap();
    let c = compare(&h, &h);
    assert!(c.count_deltas().iter().all(|d| d.3 == 0));
    assert!(c.residual_deltas().iter().all(|d| d.3 == 0.0));
    assert_eq!(c.fewer_fom_evals, Fewer::Tie);
    let p = dir.path().join("p2.toml.csv");
    let out = tsqp(&[Path::new("compare"), &p, &p], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().ends_with("fewer FOM evaluations: neither (equal)\n"));
}

#[test]
fn truncated_history_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let (_, text) = run_file(dir.path(), "p2.toml", "[problem]\nkind = \"p2\"\n[output]\nhistory = \"p2.toml.csv\"\n", None);
    let lines: Vec<&str> = text.lines().collect();
    let first_row = lines.iter().position(|l| l.starts_with("0,")).unwrap();
    let cut = format!("{}\n{}", lines[..first_row].join("\n"), &lines[first_row][..9]);
    match History::parse(&cut) {
        Err(ParseError::Line { line, .. }) => assert_eq!(line, first_row + 1),
        other => panic!("{other:?}"),
    }
    let p = dir.path().join("cut.csv");
    fs::write(&p, &cut).unwrap();
    let out = tsqp(&[Path::new("compare"), &p, &p], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("line {}", first_row + 1)));
}

#[test]
fn reduced_model_run_uses_fewer_full_order_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let (o1, rom) = run_file(dir.path(), "rom.toml", &format!("{BURGERS_ROM}[output]\nhistory = \"rom.toml.csv\"\n"), None);
    let (o2, fom) =
        run_file(dir.path(), "fom.toml", "[problem]\nkind = \"burgers\"\n[output]\nhistory = \"fom.toml.csv\"\n", None);
    assert_eq!((o1.status.code(), o2.status.code()), (Some(0), Some(0)));
    let (rom, fom) = (History::parse(&rom).unwrap(), History::parse(&fom).unwrap());
    assert_eq!(compare(&fom, &rom).fewer_fom_evals, Fewer::B);
    assert!(rom.summary.max_basis > 0);
    let out = tsqp(&[Path::new("compare"), &dir.path().join("fom.toml.csv"), &dir.path().join("rom.toml.csv")], None);
    assert!(String::from_utf8(out.stdout).unwrap().ends_with("fewer FOM evaluations: b\n"));
}

#[test]
fn parameter_block_reproduces_the_run() {
    let cfg = RunConfig::from_toml("seed = 3\n[problem]\nkind = \"p2\"\n[solver]\nmethod = \"inexact\"\nprovider = \"synthetic\"\n")
        .unwrap();
    let first = execute(&cfg).unwrap().history;
    let again = RunConfig::from_toml(&first.parameters).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(execute(&again).unwrap().history.render(), first.render());
}
