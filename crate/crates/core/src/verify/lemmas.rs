//! Marginal-level inequalities checked exactly over parameter grids.

use crate::error::Result;
use crate::marginals::{Marginal, GRUNBAUM_BOUND};
use crate::report::{BoundReport, Verdict};

/// Smallest admissible slack (rhs minus lhs for an upper bound).
pub const SLACK_FLOOR: f64 = -1e-9;

/// Worst point of one inequality over a grid.
struct GridCheck {
    id: &'static str,
    worst: Option<(f64, f64, f64, String)>,
    active: usize,
}

impl GridCheck {
    fn new(id: &'static str) -> Self {
        GridCheck { id, worst: None, active: 0 }
    }

    /// Records `lhs <= rhs` at a grid point.
    fn upper(&mut self, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        self.record(rhs - lhs, lhs, rhs, at);
    }

    /// Records `lhs >= rhs` at a grid point.
    fn lower(&mut self, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        self.record(lhs - rhs, lhs, rhs, at);
    }

    fn record(&mut self, slack: f64, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        self.active += 1;
        if self.worst.as_ref().is_none_or(|w| slack < w.0 || slack.is_nan()) {
            self.worst = Some((slack, lhs, rhs, at()));
        }
    }

    fn report(self, m: &Marginal) -> BoundReport {
        let r = BoundReport::new(self.id, m.label(), 1);
        match self.worst {
            None => r.unmet("no grid point satisfies the lemma's precondition"),
            Some((slack, lhs, rhs, at)) => {
                let mut r = r.with_note(format!("min slack {slack:e} at {at}; {} points", self.active));
                r.lhs = lhs;
                r.rhs = rhs;
                r.ratio = lhs / rhs;
                r.verdict = Verdict::from_bool(slack >= SLACK_FLOOR);
                r.tolerance_policy = format!("analytic, slack >= {SLACK_FLOOR:e}");
                r
            }
        }
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
}

/// Dilation of tails: `P(|Y| >= ut) <= P(|Y| >= t)^{(u-1)/2}`, log-concave `Y`,
/// on `t ∈ (0, 5σ]` times `u ∈ [1, 6]` (10 x 10 points).
pub fn tail_dilation(m: &Marginal) -> BoundReport {
    let sd = m.scale();
    let mut g = GridCheck::new("lem62");
    for t in linspace(0.5 * sd, 5.0 * sd, 10) {
        for u in linspace(1.0, 6.0, 10) {
            g.upper(m.tail(u * t), m.tail(t).powf((u - 1.0) / 2.0), || format!("t={t}, u={u}"));
        }
    }
    g.report(m)
}

/// Small-ball dilation: `P(|Y| <= 21t) >= 5 P(|Y| <= t)` when `P(|Y| <= t) <= 1/10`,
/// on 100 geometric points `t ∈ [1e-3 σ, σ]`.
pub fn small_ball_dilation(m: &Marginal) -> BoundReport {
    let sd = m.scale();
    let mut g = GridCheck::new("lem63");
    for e in linspace(-3.0, 0.0, 100) {
        let t = sd * 10f64.powf(e);
        let small = 1.0 - m.tail(t);
        if small <= 0.1 {
            g.lower(1.0 - m.tail(21.0 * t), 5.0 * small, || format!("t={t}"));
        }
    }
    g.report(m)
}

/// Halving: `P(|Y| >= t/2) >= P(|Y| >= t) / sqrt(e p)` for mean-zero `Y`
/// whenever `P(|Y| >= t) <= p`; checked at the sharpest `p = P(|Y| >= t)`
/// and at `p = 1`, on 50 points each of `t ∈ (0, 8σ]`.
pub fn halving(m: &Marginal) -> BoundReport {
    let mut g = GridCheck::new("lem53");
    if m.is_mean_zero() {
        let sd = m.scale();
        for t in linspace(0.16 * sd, 8.0 * sd, 50) {
            let tail = m.tail(t);
            for p in [tail, 1.0] {
                if tail > 0.0 && p > 0.0 {
                    g.lower(m.tail(0.5 * t), tail / (std::f64::consts::E * p).sqrt(), || format!("t={t}, p={p}"));
                }
            }
        }
    }
    g.report(m)
}

/// Cut means of symmetric log-concave `V`:
/// `E|V| 1{|V|>=t} <= (4/λ) P(|V|>=t)^{1-λ} E|V| 1{|V|>=λt}`
/// for `λ ∈ {1/8, 1/4, 1/2, 1}` and 25 values of `t ∈ (0, 5σ]`.
pub fn cut_mean_dilation(m: &Marginal) -> Result<BoundReport> {
    let mut g = GridCheck::new("lem33.cutmean");
    if m.is_symmetric() {
        let sd = m.scale();
        for lambda in [0.125, 0.25, 0.5, 1.0] {
            for t in linspace(0.2 * sd, 5.0 * sd, 25) {
                let rhs = 4.0 / lambda * m.tail(t).powf(1.0 - lambda) * m.truncated_abs_mean(lambda * t)?;
                g.upper(m.truncated_abs_mean(t)?, rhs, || format!("t={t}, lambda={lambda}"));
            }
        }
    }
    Ok(g.report(m))
}

/// `E|V| 1{|V|>=t} <= 4t P(|V|>=t)` for symmetric log-concave `V` once
/// `P(|V|>=t) <= 1/4`, on 100 points of `t ∈ (0, 10σ]`.
pub fn cut_mean_tail_form(m: &Marginal) -> Result<BoundReport> {
    let mut g = GridCheck::new("lem33.tailform");
    if m.is_symmetric() {
        let sd = m.scale();
        for t in linspace(0.1 * sd, 10.0 * sd, 100) {
            let tail = m.tail(t);
            if tail <= 0.25 {
                g.upper(m.truncated_abs_mean(t)?, 4.0 * t * tail, || format!("t={t}"));
            }
        }
    }
    Ok(g.report(m))
}

/// `min(P(Y >= 0), P(Y <= 0)) >= 1/e` for mean-zero log-concave `Y`.
pub fn grunbaum(m: &Marginal) -> BoundReport {
    let mut g = GridCheck::new("grunbaum");
    if m.is_mean_zero() && !m.is_degenerate() {
        let up = m.survival_signed(0.0);
        g.lower(up.min(1.0 - up), GRUNBAUM_BOUND, || "t=0".to_string());
    }
    g.report(m)
}

/// `||Y||_p <= C₁ (p/q) ||Y||_q` for `p >= q >= 2` on `{2, 3, 4, 6, 8, 12, 16}`,
/// with the family constant from [`Marginal::moment_growth_constant`].
pub fn moment_growth(m: &Marginal) -> Result<BoundReport> {
    let mut g = GridCheck::new("moment_growth");
    let orders = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0];
    let c1 = m.moment_growth_constant();
    if !m.is_degenerate() {
        for (i, &q) in orders.iter().enumerate() {
            let mq = m.moment_p(q)?;
            for &p in &orders[i..] {
                let mp = m.moment_p(p)?;
                assert!(mp.is_finite() && mq.is_finite(), "moments must be finite");
                g.upper(mp / mq, c1 * p / q, || format!("p={p}, q={q}"));
            }
        }
    }
    Ok(g.report(m))
}

/// Every marginal-level check on every family given.
pub fn lemma_grid(marginals: &[Marginal]) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for m in marginals {
        m.validate()?;
        out.push(cut_mean_dilation(m)?);
        out.push(cut_mean_tail_form(m)?);
        out.push(halving(m));
        out.push(tail_dilation(m));
        out.push(small_ball_dilation(m));
        out.push(grunbaum(m));
        out.push(moment_growth(m)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::catalog;

    #[test]
    fn catalog_passes_everywhere_applicable() {
        let reports = lemma_grid(&catalog()).unwrap();
        for r in &reports {
            assert_ne!(r.verdict, Verdict::Fail, "{r:#?}");
        }
        let passes = reports.iter().filter(|r| r.verdict == Verdict::Pass).count();
        assert!(passes >= 50, "{passes}");
    }

    #[test]
    fn gating_by_family() {
        let exp = Marginal::shifted_exponential(1.0, false).unwrap();
        assert_eq!(grunbaum(&exp).verdict, Verdict::HypothesisNotMet);
        assert_eq!(halving(&exp).verdict, Verdict::HypothesisNotMet);
        assert_eq!(cut_mean_dilation(&exp).unwrap().verdict, Verdict::HypothesisNotMet);
        assert_eq!(tail_dilation(&exp).verdict, Verdict::Pass);
        let centered = Marginal::shifted_exponential(1.0, true).unwrap();
        let g = grunbaum(&centered);
        assert_eq!(g.verdict, Verdict::Pass);
        assert!((g.lhs - GRUNBAUM_BOUND).abs() < 1e-12);
    }

    #[test]
    fn detects_violation() {
        // Point mass at zero: halving and Grünbaum are vacuous, dilations hold.
        let r = tail_dilation(&Marginal::point_mass());
        assert_ne!(r.verdict, Verdict::Fail);
        let mut g = GridCheck::new("x");
        g.upper(1.0, 0.5, || "here".into());
        assert!(g.report(&Marginal::gaussian(1.0).unwrap()).failed());
    }
}
