//! Verdict records shared by every verification check.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    /// The inequality holds but its right side is numerically contentless.
    Vacuous,
    /// Degenerate input (for instance `0 / 0`); nothing was checked.
    Skip,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Vacuous => "VACUOUS",
            Verdict::Skip => "SKIP",
        }
    }

    /// Worst of two verdicts: Fail > Vacuous > Skip > Pass.
    pub fn and(self, other: Verdict) -> Verdict {
        let rank = |v: Verdict| match v {
            Verdict::Pass => 0,
            Verdict::Skip => 1,
            Verdict::Vacuous => 2,
            Verdict::Fail => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One check outcome: `measured` compared against `bound` with `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub id: String,
    pub spec_digest: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Sequence member, when the check belongs to one.
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(id: impl Into<String>, measured: f64, bound: f64, tolerance: f64, verdict: Verdict) -> Self {
        Self {
            id: id.into(),
            spec_digest: String::new(),
            measured,
            bound,
            tolerance,
            verdict,
            k: None,
            tau: None,
            notes: Vec::new(),
        }
    }

    /// PASS iff `measured <= bound + tolerance`.
    pub fn upper(id: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        let ok = measured <= bound + tolerance;
        Self::new(id, measured, bound, tolerance, if ok { Verdict::Pass } else { Verdict::Fail })
    }

    /// PASS iff `measured >= bound - tolerance`.
    pub fn lower(id: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        let ok = measured >= bound - tolerance;
        Self::new(id, measured, bound, tolerance, if ok { Verdict::Pass } else { Verdict::Fail })
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn at_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn member(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Downgrades the verdict to `Fail` unless `ok`, recording why.
    pub fn require(mut self, ok: bool, why: impl Into<String>) -> Self {
        if !ok {
            self.verdict = Verdict::Fail;
            self.notes.push(why.into());
        }
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e} bound {:.6e} tol {:.3e}",
            self.verdict, self.id, self.measured, self.bound, self.tolerance
        )?;
        if let Some(k) = self.k {
            write!(f, " k={k}")?;
        }
        if let Some(t) = self.tau {
            write!(f, " tau={t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_ordering() {
        assert_eq!(Verdict::Pass.and(Verdict::Vacuous), Verdict::Vacuous);
        assert_eq!(Verdict::Fail.and(Verdict::Vacuous), Verdict::Fail);
        assert_eq!(Verdict::Skip.and(Verdict::Pass), Verdict::Skip);
    }

    #[test]
    fn comparisons() {
        assert!(CheckReport::upper("a", 1.0, 1.0, 0.0).passed());
        assert!(!CheckReport::upper("a", 1.1, 1.0, 0.05).passed());
        assert!(CheckReport::lower("b", 0.96, 1.0, 0.05).passed());
        assert!(!CheckReport::lower("b", 0.5, 1.0, 0.0).require(true, "").passed());
        let r = CheckReport::upper("c", 0.0, 1.0, 0.0).require(false, "precondition");
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.notes, vec!["precondition".to_string()]);
    }
}
