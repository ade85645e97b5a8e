//! Deterministic rendering of check reports and data tables.
//!
//! Every file starts with a `# config-digest:` line. Reports are ordered by
//! id, then member `k`, then `tau`, and numbers use a fixed format, so two
//! runs of the same config produce byte-identical output.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::check::{CheckReport, Verdict};
use crate::error::{Error, Result};

/// A named CSV table written next to the reports as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    pub fn new(name: impl Into<String>, csv: impl Into<String>) -> Self {
        Self { name: name.into(), csv: csv.into() }
    }
}

/// Overall outcome of a run, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunStatus {
    Pass,
    Fail,
    /// Nothing failed, but some checks were vacuous or skipped.
    Warning,
}

impl RunStatus {
    pub fn of(reports: &[CheckReport]) -> Self {
        let worst = reports.iter().fold(Verdict::Pass, |v, r| v.and(r.verdict));
        match worst {
            Verdict::Pass => RunStatus::Pass,
            Verdict::Fail => RunStatus::Fail,
            Verdict::Vacuous | Verdict::Skip => RunStatus::Warning,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::Fail => 1,
            RunStatus::Warning => 2,
        }
    }
}

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.12e}")
    }
}

fn order(a: &CheckReport, b: &CheckReport) -> Ordering {
    a.id
        .cmp(&b.id)
        .then(a.k.cmp(&b.k))
        .then_with(|| match (a.tau, b.tau) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (x, y) => x.is_some().cmp(&y.is_some()),
        })
        // ties on the key still need a fixed order for byte-identical output
        .then(a.measured.total_cmp(&b.measured))
        .then(a.bound.total_cmp(&b.bound))
        .then(a.tolerance.total_cmp(&b.tolerance))
        .then_with(|| a.notes.cmp(&b.notes))
}

/// Sort by `(id, k, tau)`, ties broken by the numbers and notes; also stamps `digest` on every report.
pub fn sorted(reports: &[CheckReport], digest: &str) -> Result<Vec<CheckReport>> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("refusing to emit an empty report list".into()));
    }
    let mut out = reports.to_vec();
    out.sort_by(order);
    for r in &mut out {
        r.spec_digest = digest.to_string();
    }
    Ok(out)
}

fn opt_k(k: Option<usize>) -> String {
    k.map(|k| k.to_string()).unwrap_or_else(|| "-".into())
}

fn opt_tau(t: Option<f64>) -> String {
    t.map(fmt_num).unwrap_or_else(|| "-".into())
}

/// One record per line, then a summary block.
pub fn render_text(reports: &[CheckReport], digest: &str) -> Result<String> {
    let reports = sorted(reports, digest)?;
    let mut out = format!("# config-digest: {digest}\n");
    for r in &reports {
        let _ = writeln!(
            out,
            "{:<8} {} k={} tau={} measured={} bound={} tol={}",
            r.verdict.as_str(),
            r.id,
            opt_k(r.k),
            opt_tau(r.tau),
            fmt_num(r.measured),
            fmt_num(r.bound),
            fmt_num(r.tolerance)
        );
        for n in &r.notes {
            let _ = writeln!(out, "    {n}");
        }
    }
    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    let _ = writeln!(
        out,
        "# summary: {} checks, {} pass, {} fail, {} vacuous, {} skip",
        reports.len(),
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Vacuous),
        count(Verdict::Skip)
    );
    for r in reports.iter().filter(|r| r.verdict == Verdict::Vacuous) {
        let _ = writeln!(out, "# vacuous: {} (bound {})", r.id, fmt_num(r.bound));
    }
    Ok(out)
}

pub fn render_csv(reports: &[CheckReport], digest: &str) -> Result<String> {
    let reports = sorted(reports, digest)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["id", "k", "tau", "verdict", "measured", "bound", "tolerance", "spec_digest", "notes"]).map_err(io)?;
    for r in &reports {
        w.write_record([
            r.id.clone(),
            opt_k(r.k),
            opt_tau(r.tau),
            r.verdict.as_str().to_string(),
            fmt_num(r.measured),
            fmt_num(r.bound),
            fmt_num(r.tolerance),
            r.spec_digest.clone(),
            r.notes.join("; "),
        ])
        .map_err(io)?;
    }
    let body = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(format!("# config-digest: {digest}\n{}", String::from_utf8_lossy(&body)))
}

/// Writes `checks.txt`, `checks.csv` and one file per table into `dir`.
pub fn emit_report(reports: &[CheckReport], tables: &[Table], digest: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let text = render_text(reports, digest)?;
    let csv = render_csv(reports, digest)?;
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| Error::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = vec![(dir.join("checks.txt"), text), (dir.join("checks.csv"), csv)];
    for t in tables {
        files.push((dir.join(format!("{}.csv", t.name)), format!("# config-digest: {digest}\n{}", t.csv)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, body) in files {
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CheckReport> {
        vec![
            CheckReport::upper("mass-bound", 0.5, 1.0, 1e-3).at_tau(0.2),
            CheckReport::upper("cg-monotone", 0.1, 0.2, 0.0).member(3),
            CheckReport::upper("mass-bound", 0.4, 1.0, 1e-3).at_tau(0.1).with_note("a, \"quoted\" note"),
            CheckReport::upper("cg-monotone", 0.2, 0.3, 0.0).member(2),
        ]
    }

    #[test]
    fn ordering_is_by_id_k_tau() {
        let s = sorted(&sample(), "d").unwrap();
        let keys: Vec<_> = s.iter().map(|r| (r.id.as_str(), r.k, r.tau)).collect();
        assert_eq!(
            keys,
            vec![("cg-monotone", Some(2), None), ("cg-monotone", Some(3), None), ("mass-bound", None, Some(0.1)), ("mass-bound", None, Some(0.2))]
        );
        assert!(s.iter().all(|r| r.spec_digest == "d"));
    }

    #[test]
    fn rendering_is_independent_of_input_order() {
        let mut rev = sample();
        rev.reverse();
        assert_eq!(render_text(&sample(), "x").unwrap(), render_text(&rev, "x").unwrap());
        assert_eq!(render_csv(&sample(), "x").unwrap(), render_csv(&rev, "x").unwrap());
    }

    #[test]
    fn empty_list_is_rejected() {
        assert!(render_text(&[], "x").is_err());
        assert!(emit_report(&[], &[], "x", Path::new("/nonexistent")).is_err());
    }

    #[test]
    fn csv_quotes_notes_and_carries_digest() {
        let csv = render_csv(&sample(), "abc").unwrap();
        assert!(csv.starts_with("# config-digest: abc\n"));
        assert!(csv.contains("\"a, \"\"quoted\"\" note\""));
    }

    #[test]
    fn status_ranks_failures_above_warnings() {
        let mut r = sample();
        assert_eq!(RunStatus::of(&r), RunStatus::Pass);
        r.push(CheckReport::new("v", 0.0, 0.0, 0.0, Verdict::Vacuous));
        assert_eq!(RunStatus::of(&r).exit_code(), 2);
        r.push(CheckReport::new("f", 0.0, 0.0, 0.0, Verdict::Fail));
        assert_eq!(RunStatus::of(&r).exit_code(), 1);
    }

    #[test]
    fn emit_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&sample(), &[Table::new("mass", "tau,mass\n0,1\n")], "abc", dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        for f in files {
            assert!(std::fs::read_to_string(f).unwrap().starts_with("# config-digest: abc\n"));
        }
    }
}
