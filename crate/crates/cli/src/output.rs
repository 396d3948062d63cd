//! CSV, human-readable tables and two-column plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use xisim_core::survival::TableRow;

use crate::error::CliError;
use crate::experiments::{ExperimentResult, SurvivalResult};
use crate::runner::Report;

pub const CSV_HEADER: [&str; 6] = ["n", "M(n)", "k(n)", "se_k", "h(n)", "se_h"];

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Survival table as CSV with a fixed column order; undefined estimators
/// are empty fields.
pub fn survival_csv(rows: &[TableRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.survivors.to_string(),
            opt(r.k.map(|e| e.value)),
            opt(r.k.map(|e| e.std_err)),
            opt(r.h.map(|e| e.value)),
            opt(r.h.map(|e| e.std_err)),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("csv: {e}")))
}

fn fixed(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

fn check_nonempty(len: usize, field: &str) -> Result<(), CliError> {
    if len == 0 {
        Err(CliError::Data(format!("{field}: empty")))
    } else {
        Ok(())
    }
}

/// Checks the parts of a report that rendering relies on.
pub fn check_report(report: &Report) -> Result<(), CliError> {
    match &report.result {
        ExperimentResult::Survival(r) | ExperimentResult::Tuple(r) => {
            check_nonempty(r.table.checkpoints.len(), "result.table.checkpoints")?;
            if r.table.counts.len() != r.table.checkpoints.len() {
                return Err(CliError::Data("result.table.counts: length differs from checkpoints".into()));
            }
            check_nonempty(r.rows.len(), "result.rows")
        }
        ExperimentResult::Validate(v) => check_nonempty(v.checks.len(), "result.checks"),
        ExperimentResult::Pathspace(p) => check_nonempty(p.configs.len(), "result.configs"),
        ExperimentResult::Splitting(s) => check_nonempty(s.configs.len(), "result.configs"),
        ExperimentResult::Mixing(m) => {
            check_nonempty(m.diagnostics.len(), "result.diagnostics")?;
            for (i, d) in m.diagnostics.iter().enumerate() {
                check_nonempty(d.shells.len(), &format!("result.diagnostics[{i}].shells"))?;
                if d.d.len() != d.shells.len() {
                    return Err(CliError::Data(format!("result.diagnostics[{i}].d: length differs from shells")));
                }
            }
            Ok(())
        }
        ExperimentResult::Cone(c) => check_nonempty(c.estimates.len(), "result.estimates"),
    }
}

fn survival_table(out: &mut String, r: &SurvivalResult) {
    let t = &r.table;
    let _ = writeln!(
        out,
        "{} walks in groups {}+{}, M = {}, h lag m = {}",
        t.groups.0 + t.groups.1,
        t.groups.0,
        t.groups.1,
        t.pairs,
        t.h_lag
    );
    let _ = writeln!(out, "{:>10} {:>10} {:>8} {:>8}", "n", "M(n)", "k(n)", "h(n)");
    for row in &r.rows {
        let _ = writeln!(
            out,
            "{:>10} {:>10} {:>8} {:>8}",
            row.n,
            row.survivors,
            fixed(row.k.map(|e| e.value), 4),
            fixed(row.h.map(|e| e.value), 4)
        );
    }
}

/// Human-readable summary of a report.
pub fn render(report: &Report) -> Result<String, CliError> {
    check_report(report)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} ({}, seed {})",
        report.config.experiment.name(),
        report.generator,
        report.seed
    );
    match &report.result {
        ExperimentResult::Survival(r) | ExperimentResult::Tuple(r) => survival_table(&mut out, r),
        ExperimentResult::Validate(v) => {
            let _ = writeln!(out, "{:<16} {:>8} {:>10} {:>10} {:>10}  result", "check", "param", "estimate", "expected", "tol");
            for c in &v.checks {
                let _ = writeln!(
                    out,
                    "{:<16} {:>8} {:>10.5} {:>10.5} {:>10.5}  {}",
                    c.name,
                    num(c.parameter),
                    c.estimate,
                    c.expected,
                    c.tolerance,
                    if c.pass { "PASS" } else { "FAIL" }
                );
            }
        }
        ExperimentResult::Pathspace(p) => {
            for row in &p.configs {
                let _ = writeln!(out, "initial {:?}, {} trials", row.initial, row.counts.trials);
                let _ = writeln!(out, "{:>6} {:>10} {:>22} {:>10}", "shell", "q", "95% CI", "P(SEP|A)");
                for (q, s) in row.q.iter().zip(&row.sep_given_alive) {
                    let _ = writeln!(
                        out,
                        "{:>6} {:>10.6} [{:>9.6}, {:>9.6}] {:>10.6}",
                        q.shell, q.estimate, q.ci.lo, q.ci.hi, s.estimate
                    );
                }
            }
        }
        ExperimentResult::Splitting(s) => {
            for row in &s.configs {
                let _ = writeln!(out, "initial {:?}", row.initial);
                let _ = writeln!(
                    out,
                    "xi over shells {}..{}: {:.4} [{:.4}, {:.4}]",
                    row.xi.n0, row.xi.n1, row.xi.xi, row.xi.summary.ci.lo, row.xi.summary.ci.hi
                );
                let _ = writeln!(out, "{:>6} {:>12} {:>12} {:>10} {:>10}", "shell", "q", "se", "ratio", "P(SEP|A)");
                for q in &row.q {
                    let ratio = q.shell.checked_sub(1).and_then(|j| row.q_sequence.ratios.get(j as usize).copied());
                    let sep = q.shell.checked_sub(1).and_then(|j| row.rho1.get(j as usize)).map(|r| r.frequency);
                    let _ = writeln!(
                        out,
                        "{:>6} {:>12.6e} {:>12.3e} {:>10} {:>10}",
                        q.shell,
                        q.q,
                        q.std_err,
                        fixed(ratio, 4),
                        fixed(sep, 5)
                    );
                }
            }
        }
        ExperimentResult::Mixing(m) => {
            for d in &m.diagnostics {
                let _ = writeln!(
                    out,
                    "{}: beta_hat {}, saturated {}, {}",
                    d.functional.name(),
                    fixed(d.beta_hat, 4),
                    d.saturated,
                    if d.pass { "PASS" } else { "FAIL" }
                );
                let _ = writeln!(out, "{:>6} {:>10} {:>10}", "shell", "D_n", "critical");
                for ((n, dn), c) in d.shells.iter().zip(&d.d).zip(&d.critical) {
                    let _ = writeln!(out, "{n:>6} {dn:>10.5} {c:>10.5}");
                }
            }
        }
        ExperimentResult::Cone(c) => {
            let _ = writeln!(out, "{:>12} {:>10} {:>22}", "half-angle", "alpha", "95% CI");
            for e in &c.estimates {
                let _ = writeln!(
                    out,
                    "{:>12.6} {:>10.4} [{:>9.4}, {:>9.4}]",
                    e.half_angle,
                    e.alpha + 0.0,
                    e.summary.ci.lo + 0.0,
                    e.summary.ci.hi + 0.0
                );
            }
        }
    }
    Ok(out)
}

fn two_columns<X: std::fmt::Display>(rows: impl IntoIterator<Item = (X, f64)>) -> String {
    rows.into_iter().map(|(x, y)| format!("{x} {}\n", num(y))).collect()
}

/// Plot-data files as `(file name, contents)`.
pub fn plot_data(report: &Report) -> Result<Vec<(String, String)>, CliError> {
    check_report(report)?;
    let kind = report.config.experiment.name();
    let mut files = Vec::new();
    match &report.result {
        ExperimentResult::Survival(r) | ExperimentResult::Tuple(r) => {
            files.push((format!("{kind}_fraction.dat"), two_columns(r.rows.iter().map(|x| (x.n, x.fraction)))));
            files.push((
                format!("{kind}_k.dat"),
                two_columns(r.rows.iter().filter_map(|x| x.k.map(|k| (x.n, k.value)))),
            ));
            files.push((
                format!("{kind}_h.dat"),
                two_columns(r.rows.iter().filter_map(|x| x.h.map(|h| (x.n, h.value)))),
            ));
        }
        ExperimentResult::Validate(v) => {
            files.push((
                format!("{kind}_error.dat"),
                two_columns(v.checks.iter().enumerate().map(|(i, c)| (i, c.estimate - c.expected))),
            ));
        }
        ExperimentResult::Pathspace(p) => {
            for (i, row) in p.configs.iter().enumerate() {
                files.push((format!("{kind}_q_{i}.dat"), two_columns(row.q.iter().map(|q| (q.shell, q.estimate)))));
            }
        }
        ExperimentResult::Splitting(s) => {
            for (i, row) in s.configs.iter().enumerate() {
                files.push((format!("{kind}_q_{i}.dat"), two_columns(row.q.iter().map(|q| (q.shell, q.q)))));
                files.push((
                    format!("{kind}_sep_{i}.dat"),
                    two_columns(row.rho1.iter().map(|r| (r.shell, r.frequency))),
                ));
            }
        }
        ExperimentResult::Mixing(m) => {
            for d in &m.diagnostics {
                files.push((
                    format!("{kind}_d_{}.dat", d.functional.name()),
                    two_columns(d.shells.iter().copied().zip(d.d.iter().copied())),
                ));
            }
        }
        ExperimentResult::Cone(c) => {
            files.push((
                format!("{kind}_alpha.dat"),
                two_columns(c.estimates.iter().map(|e| (num(e.half_angle), e.alpha))),
            ));
        }
    }
    Ok(files)
}

pub fn load_report(path: &Path) -> Result<Report, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let report: Report =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    check_report(&report)?;
    Ok(report)
}

/// Renders the report at `path` and writes its plot data into `out_dir`.
pub fn report_command(path: &Path, out_dir: &Path) -> Result<(String, Vec<PathBuf>), CliError> {
    let report = load_report(path)?;
    let text = render(&report)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, body) in plot_data(&report)? {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| CliError::io(&p, e))?;
        written.push(p);
    }
    Ok((text, written))
}
