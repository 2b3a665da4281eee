//! One instance of an inequality check and its serialization.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Number of standard errors of Monte Carlo slack granted to pass-class checks.
pub const MC_SLACK_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesisNotMet,
    Informational,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::HypothesisNotMet => "hypothesis-not-met",
            Verdict::Informational => "informational",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Both sides of one inequality instance and the verdict reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem_id: String,
    pub model: String,
    pub n: usize,
    /// Order `k` (or the level the check was evaluated at), when meaningful.
    pub k: Option<f64>,
    pub lhs: f64,
    /// Zero for analytic left-hand sides.
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub verdict: Verdict,
    pub tolerance_policy: String,
    pub seed: Option<u64>,
    /// False when the model is outside the hypotheses of the statement,
    /// whatever the verdict. Such rows never feed calibration.
    pub hypotheses_met: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl BoundReport {
    pub fn new(theorem_id: impl Into<String>, model: impl Into<String>, n: usize) -> Self {
        BoundReport {
            theorem_id: theorem_id.into(),
            model: model.into(),
            n,
            k: None,
            lhs: f64::NAN,
            lhs_stderr: 0.0,
            rhs: f64::NAN,
            ratio: f64::NAN,
            verdict: Verdict::Informational,
            tolerance_policy: String::new(),
            seed: None,
            hypotheses_met: true,
            note: String::new(),
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// `lhs <= rhs` with `3 * lhs_stderr` slack.
    pub fn upper(mut self, lhs: f64, lhs_stderr: f64, rhs: f64) -> Self {
        self.lhs = lhs;
        self.lhs_stderr = lhs_stderr;
        self.rhs = rhs;
        self.ratio = lhs / rhs;
        self.verdict = Verdict::from_bool(lhs <= rhs + MC_SLACK_SIGMAS * lhs_stderr);
        self.tolerance_policy = "one-sided upper, 3 sigma".into();
        self
    }

    /// `lhs >= rhs` with `3 * lhs_stderr` slack.
    pub fn lower(mut self, lhs: f64, lhs_stderr: f64, rhs: f64) -> Self {
        self.lhs = lhs;
        self.lhs_stderr = lhs_stderr;
        self.rhs = rhs;
        self.ratio = lhs / rhs;
        self.verdict = Verdict::from_bool(lhs + MC_SLACK_SIGMAS * lhs_stderr >= rhs);
        self.tolerance_policy = "one-sided lower, 3 sigma".into();
        self
    }

    /// `ratio = lhs / rhs` must fall in `[floor, cap]`, widened by the
    /// ratio's standard error times 3.
    pub fn window(mut self, lhs: f64, lhs_stderr: f64, rhs: f64, floor: f64, cap: f64) -> Self {
        self.lhs = lhs;
        self.lhs_stderr = lhs_stderr;
        self.rhs = rhs;
        self.ratio = lhs / rhs;
        let slack = MC_SLACK_SIGMAS * lhs_stderr / rhs.abs();
        self.verdict = Verdict::from_bool(self.ratio + slack >= floor && self.ratio - slack <= cap);
        self.tolerance_policy = format!("window [{floor}, {cap}], 3 sigma");
        self
    }

    /// Record the values but never fail.
    pub fn informational(mut self, lhs: f64, lhs_stderr: f64, rhs: f64) -> Self {
        self.lhs = lhs;
        self.lhs_stderr = lhs_stderr;
        self.rhs = rhs;
        self.ratio = lhs / rhs;
        self.verdict = Verdict::Informational;
        self.tolerance_policy = "informational".into();
        self
    }

    /// Downgrade to `hypothesis-not-met`, keeping the computed values.
    pub fn unmet(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::HypothesisNotMet;
        self.hypotheses_met = false;
        self.note = why.into();
        self
    }

    /// Keep the values as an illustration outside the hypotheses.
    pub fn illustration(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::Informational;
        self.hypotheses_met = false;
        self.note = why.into();
        self
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

pub const CSV_HEADER: [&str; 10] = ["theorem_id", "model", "n", "k", "lhs", "lhs_stderr", "rhs", "ratio", "verdict", "seed"];

/// Write reports as CSV with the fixed column set. Floats use Rust's
/// shortest round-trip formatting, which is locale independent.
pub fn write_csv<W: Write>(out: W, reports: &[BoundReport]) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in reports {
        w.write_record([
            r.theorem_id.clone(),
            r.model.clone(),
            r.n.to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.lhs.to_string(),
            r.lhs_stderr.to_string(),
            r.rhs.to_string(),
            r.ratio.to_string(),
            r.verdict.as_str().to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    Ok(())
}
