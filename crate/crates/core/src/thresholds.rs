//! The threshold functionals
//!
//! ```text
//! t(k, X)  = inf { t > 0 : (1/t) Σ_i E|X_i| 1{|X_i| >= t} <= k }
//! t*(p, X) = inf { t > 0 : Σ_i P(|X_i| >= t) <= p }
//! ```
//!
//! Both depend on the coordinate marginals only. Each defining sum is
//! nonincreasing in `t`, so the infimum is located by bisection.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::marginals::Marginal;
use crate::report::{BoundReport, Verdict};
use crate::roots::bisect_nonincreasing;

const MAX_BRACKET_STEPS: usize = 2100;
const MAX_BISECTIONS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    /// `t(k, X)`.
    T,
    /// `t*(p, X)`.
    TStar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdQuery {
    pub marginals: Vec<Marginal>,
    pub level: f64,
    pub kind: ThresholdKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdFlag {
    Interior,
    /// The defining condition holds for every `t > 0`.
    ZeroEndpoint,
    /// `t*` with `p >= n`: zero by extension of the definition.
    LevelAtLeastDimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub value: f64,
    /// `G(value) - level` for the defining sum `G`.
    pub residual: f64,
    pub iterations: usize,
    /// Final bracket; `G(lo) > level >= G(hi)` and `value == hi`.
    pub bracket: (f64, f64),
    pub flag: ThresholdFlag,
}

/// Marginals grouped by identical law, so i.i.d. vectors cost one
/// evaluation per step regardless of dimension.
#[derive(Debug, Clone)]
pub struct MarginalGroups {
    groups: Vec<(Marginal, f64)>,
    n: usize,
}

impl MarginalGroups {
    pub fn new(marginals: &[Marginal]) -> Result<Self> {
        let mut groups: Vec<(Marginal, f64)> = Vec::new();
        for m in marginals {
            m.validate()?;
            match groups.iter_mut().find(|(g, _)| g == m) {
                Some((_, c)) => *c += 1.0,
                None => groups.push((m.clone(), 1.0)),
            }
        }
        Ok(MarginalGroups { groups, n: marginals.len() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Σ_i E|X_i| 1{|X_i| >= t}`.
    pub fn excess_mean_sum(&self, t: f64) -> f64 {
        self.groups.iter().map(|(m, c)| c * m.cut_mean(t)).sum()
    }

    /// `Σ_i P(|X_i| >= t)`.
    pub fn survival_sum(&self, t: f64) -> f64 {
        self.groups.iter().map(|(m, c)| c * m.tail(t)).sum()
    }

    /// The defining function of the requested threshold.
    pub fn defining_sum(&self, kind: ThresholdKind, t: f64) -> f64 {
        match kind {
            ThresholdKind::T => self.excess_mean_sum(t) / t,
            ThresholdKind::TStar => self.survival_sum(t),
        }
    }

    fn scale(&self) -> f64 {
        self.groups
            .iter()
            .map(|(m, _)| m.scale().max(m.mean().abs()))
            .fold(0.0, f64::max)
    }

    /// Sum of the `k` largest `E|X_i|`.
    pub fn top_abs_means(&self, k: usize) -> f64 {
        let mut means: Vec<(f64, f64)> = self.groups.iter().map(|(m, c)| (m.abs_mean(), *c)).collect();
        means.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut left = k as f64;
        let mut total = 0.0;
        for (mean, c) in means {
            let take = c.min(left);
            total += take * mean;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        total
    }

    pub fn solve(&self, kind: ThresholdKind, level: f64) -> Result<ThresholdResult> {
        if !(level.is_finite() && level > 0.0) {
            return domain(format!("threshold level must be finite and positive, got {level}"));
        }
        let zero = |flag| ThresholdResult { value: 0.0, residual: 0.0, iterations: 0, bracket: (0.0, 0.0), flag };
        if kind == ThresholdKind::TStar && level >= self.n as f64 {
            return Ok(zero(ThresholdFlag::LevelAtLeastDimension));
        }
        let scale = self.scale();
        if scale == 0.0 {
            return Ok(zero(ThresholdFlag::ZeroEndpoint));
        }
        let g = |t: f64| self.defining_sum(kind, t);

        let mut steps = 0;
        let mut lo = 1e-12 * scale;
        while g(lo) <= level {
            lo *= 1e-3;
            steps += 1;
            if lo < f64::MIN_POSITIVE || steps > MAX_BRACKET_STEPS {
                return Ok(zero(ThresholdFlag::ZeroEndpoint));
            }
        }
        let mut hi = scale;
        while g(hi) > level {
            hi *= 2.0;
            steps += 1;
            if !hi.is_finite() || steps > MAX_BRACKET_STEPS {
                return Err(Error::Numerical(format!("no upper bracket found for level {level}")));
            }
        }
        if hi <= lo {
            lo = hi * 0.5;
            while g(lo) <= level {
                lo *= 0.5;
            }
        }
        let b = bisect_nonincreasing(g, level, lo, hi, 0.0, MAX_BISECTIONS)?;
        Ok(ThresholdResult {
            value: b.hi,
            residual: g(b.hi) - level,
            iterations: b.iterations,
            bracket: (b.lo, b.hi),
            flag: ThresholdFlag::Interior,
        })
    }
}

pub fn threshold(q: &ThresholdQuery) -> Result<ThresholdResult> {
    if q.marginals.is_empty() {
        return domain("at least one marginal is required");
    }
    MarginalGroups::new(&q.marginals)?.solve(q.kind, q.level)
}

/// `t(k, X)` for any real `k > 0`.
pub fn t_threshold(marginals: &[Marginal], k: f64) -> Result<ThresholdResult> {
    threshold(&ThresholdQuery { marginals: marginals.to_vec(), level: k, kind: ThresholdKind::T })
}

/// `t*(p, X)` for `p > 0`; `p >= n` yields 0, flagged.
pub fn tstar_threshold(marginals: &[Marginal], p: f64) -> Result<ThresholdResult> {
    if !(p > 0.0) {
        return domain(format!("t* level must be positive, got {p}"));
    }
    threshold(&ThresholdQuery { marginals: marginals.to_vec(), level: p, kind: ThresholdKind::TStar })
}

/// `2k t(k, X)`, an upper bound on `E max_{|I|=k} Σ_{i∈I} |X_i|` valid for any
/// vector with integrable coordinates.
pub fn topk_mean_upper_bound(marginals: &[Marginal], k: f64) -> Result<f64> {
    Ok(2.0 * k * t_threshold(marginals, k)?.value)
}

/// Checks `(1/3)(t* + M/k) <= t(k) <= 4(t* + M/k)` where `M` is the sum of
/// the `k` largest `E|X_i|`. Reported ratio is `t(k) / (t*(k) + M/k)`.
pub fn sandwich_check(marginals: &[Marginal], k: usize) -> Result<BoundReport> {
    let groups = MarginalGroups::new(marginals)?;
    let n = groups.dim();
    if k == 0 || k > n {
        return domain(format!("k must lie in 1..={n}, got {k}"));
    }
    let kf = k as f64;
    let t = groups.solve(ThresholdKind::T, kf)?.value;
    let tstar = groups.solve(ThresholdKind::TStar, kf)?.value;
    let anchor = tstar + groups.top_abs_means(k) / kf;
    let ratio = t / anchor;
    let mut report = BoundReport::new("lem51", label(marginals), n).with_k(kf);
    report.lhs = t;
    report.rhs = anchor;
    report.ratio = ratio;
    report.tolerance_policy = "analytic window [1/3, 4], rel 1e-12".into();
    let tol = 1e-12;
    report.verdict = Verdict::from_bool(ratio >= 1.0 / 3.0 - tol && ratio <= 4.0 + tol);
    if !marginals.iter().all(Marginal::is_symmetric) {
        report = report.unmet("asymmetric marginal: symmetric log-concave hypothesis not met");
    }
    Ok(report)
}

/// Parameters of [`isotropic_asymptotics_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsGrid {
    pub p_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub window: (f64, f64),
}

impl AsymptoticsGrid {
    /// `p ∈ {n/4, n/2, 3n/4, n-1}`, `k ∈ {1, 2, 4, ..., n/2}`, window `[0.05, 20]`.
    pub fn standard(n: usize) -> Self {
        let nf = n as f64;
        let mut p_grid = vec![nf / 4.0, nf / 2.0, 3.0 * nf / 4.0, nf - 1.0];
        p_grid.retain(|p| *p > 0.0 && *p < nf);
        let mut k_grid = Vec::new();
        let mut k = 1.0;
        while k <= nf / 2.0 {
            k_grid.push(k);
            k *= 2.0;
        }
        AsymptoticsGrid { p_grid, k_grid, window: (0.05, 20.0) }
    }
}

/// Ratios for an isotropic symmetric vector: `t*(p) n / (n - p)` for
/// `p >= n/4`, and `t*(k/2) / t*(k)`, `t(k) / t*(k)` for `k <= n/2`.
pub fn isotropic_asymptotics_check(marginals: &[Marginal], grid: &AsymptoticsGrid) -> Result<Vec<BoundReport>> {
    let groups = MarginalGroups::new(marginals)?;
    let n = groups.dim();
    let nf = n as f64;
    let name = label(marginals);
    let (floor, cap) = grid.window;
    let isotropic = marginals
        .iter()
        .all(|m| m.is_symmetric() && m.is_mean_zero() && (m.variance() - 1.0).abs() <= 1e-12);
    let mut out = Vec::new();
    for &p in &grid.p_grid {
        if !(p >= nf / 4.0 && p < nf) {
            return domain(format!("p = {p} outside [n/4, n)"));
        }
        let ts = groups.solve(ThresholdKind::TStar, p)?.value;
        out.push(BoundReport::new("lem66.tstar_tail", name.clone(), n).with_k(p).window(
            ts,
            0.0,
            (nf - p) / nf,
            floor,
            cap,
        ));
    }
    for &k in &grid.k_grid {
        if !(k > 0.0 && k <= nf / 2.0) {
            return domain(format!("k = {k} outside (0, n/2]"));
        }
        let ts = groups.solve(ThresholdKind::TStar, k)?.value;
        let ts_half = groups.solve(ThresholdKind::TStar, k / 2.0)?.value;
        let t = groups.solve(ThresholdKind::T, k)?.value;
        out.push(BoundReport::new("lem66.tstar_half", name.clone(), n).with_k(k).window(ts_half, 0.0, ts, floor, cap));
        let mut r = BoundReport::new("lem66.t_over_tstar", name.clone(), n).with_k(k).window(t, 0.0, ts, floor, cap);
        // t* <= t holds exactly, independently of the window.
        if t < ts {
            r.verdict = Verdict::Fail;
            r.note = "t(k) < t*(k)".into();
        }
        out.push(r);
    }
    if !isotropic {
        out = out
            .into_iter()
            .map(|r| r.unmet("marginals are not symmetric with unit variance"))
            .collect();
    }
    Ok(out)
}

fn label(marginals: &[Marginal]) -> String {
    match marginals.first() {
        Some(m) if marginals.iter().all(|x| x == m) => format!("iid_{}", m.label()),
        _ => "mixed".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn iid(m: Marginal, n: usize) -> Vec<Marginal> {
        vec![m; n]
    }

    /// Independent oracle: plain bisection on the closed-form defining
    /// equation, written without the library's solver.
    fn oracle_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    #[test]
    fn t_for_iid_laplace() {
        // n (t + 1) e^{-t} = k t with n = 100, k = 10.
        let expected = oracle_root(|t| 100.0 * (t + 1.0) * (-t).exp() - 10.0 * t, 0.1, 10.0);
        assert!((expected - 2.626).abs() < 1e-3);
        let r = t_threshold(&iid(Marginal::laplace(1.0).unwrap(), 100), 10.0).unwrap();
        assert!((r.value - expected).abs() < 1e-12, "{} vs {expected}", r.value);
        assert!(r.residual.abs() < 1e-9 * 10.0);
        assert!(r.bracket.0 <= r.value && r.value <= r.bracket.1);
    }

    #[test]
    fn t_for_single_uniform_is_sqrt2_minus_1() {
        let r = t_threshold(&[Marginal::uniform(1.0).unwrap()], 1.0).unwrap();
        assert!((r.value - (2f64.sqrt() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_marginals_give_zero() {
        let zeros = vec![Marginal::point_mass(); 5];
        let r = t_threshold(&zeros, 2.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.flag, ThresholdFlag::ZeroEndpoint);
        assert_eq!(tstar_threshold(&zeros, 2.0).unwrap().value, 0.0);
    }

    #[test]
    fn tstar_closed_forms() {
        let r = tstar_threshold(&iid(Marginal::laplace(1.0).unwrap(), 100), 10.0).unwrap();
        assert!((r.value - 10f64.ln()).abs() < 1e-12);
        let r = tstar_threshold(&iid(Marginal::uniform(1.0).unwrap(), 10), 5.0).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
        for n in [10usize, 100, 1000] {
            let p = n as f64 / 10.0;
            let expected = Normal::standard().inverse_cdf(1.0 - p / (2.0 * n as f64));
            let r = tstar_threshold(&iid(Marginal::gaussian(1.0).unwrap(), n), p).unwrap();
            assert!((r.value - expected).abs() < 1e-9, "{} vs {expected}", r.value);
            assert!((r.value - 1.6449).abs() < 1e-4);
        }
    }

    #[test]
    fn tstar_level_errors_and_extension() {
        let ms = iid(Marginal::gaussian(1.0).unwrap(), 4);
        assert!(tstar_threshold(&ms, 0.0).is_err());
        assert!(tstar_threshold(&ms, -1.0).is_err());
        assert!(t_threshold(&ms, 0.0).is_err());
        let r = tstar_threshold(&ms, 4.0).unwrap();
        assert_eq!((r.value, r.flag), (0.0, ThresholdFlag::LevelAtLeastDimension));
    }

    #[test]
    fn upper_bound_examples() {
        let b = topk_mean_upper_bound(&iid(Marginal::laplace(1.0).unwrap(), 100), 10.0).unwrap();
        assert!((b - 52.52).abs() < 0.02, "{b}");
        let gauss = Marginal::gaussian(1.0).unwrap();
        let t_expected = oracle_root(
            |t| 1024.0 * (2.0 / std::f64::consts::PI).sqrt() * (-t * t / 2.0).exp() - 16.0 * t,
            0.1,
            10.0,
        );
        assert!((t_expected - 2.46249).abs() < 1e-5);
        let r = t_threshold(&iid(gauss.clone(), 1024), 16.0).unwrap();
        assert!((r.value - t_expected).abs() < 1e-12);
        // k = n: the bound dominates the full sum.
        let ms = iid(Marginal::laplace(1.0).unwrap(), 7);
        assert!(topk_mean_upper_bound(&ms, 7.0).unwrap() >= 7.0);
    }

    #[test]
    fn sandwich_examples() {
        let r = sandwich_check(&iid(Marginal::laplace(1.0).unwrap(), 100), 10).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.rhs - (10f64.ln() + 1.0)).abs() < 1e-12);
        assert!(r.lhs >= (10f64.ln() + 1.0) / 3.0 && r.lhs <= 4.0 * (10f64.ln() + 1.0));
        let r = sandwich_check(&iid(Marginal::gaussian(1.0).unwrap(), 100), 10).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = sandwich_check(&iid(Marginal::shifted_exponential(1.0, true).unwrap(), 10), 2).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisNotMet);
        assert!(sandwich_check(&iid(Marginal::gaussian(1.0).unwrap(), 3), 4).is_err());
    }

    #[test]
    fn top_abs_means_picks_largest() {
        let ms = vec![
            Marginal::laplace(1.0).unwrap(),
            Marginal::laplace(3.0).unwrap(),
            Marginal::laplace(1.0).unwrap(),
            Marginal::laplace(2.0).unwrap(),
        ];
        let g = MarginalGroups::new(&ms).unwrap();
        assert!((g.top_abs_means(2) - 5.0).abs() < 1e-14);
        assert!((g.top_abs_means(4) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn asymptotics_examples() {
        let u = Marginal::uniform(3f64.sqrt()).unwrap();
        let grid = AsymptoticsGrid { p_grid: vec![512.0], k_grid: vec![512.0], window: (0.05, 20.0) };
        let reports = isotropic_asymptotics_check(&iid(u, 1024), &grid).unwrap();
        assert!((reports[0].ratio - 3f64.sqrt()).abs() < 1e-12);
        assert!(reports.iter().all(|r| r.verdict == Verdict::Pass));
        let t_over = reports.iter().find(|r| r.theorem_id == "lem66.t_over_tstar").unwrap();
        assert!(t_over.ratio >= 1.0);

        let g = iid(Marginal::gaussian(1.0).unwrap(), 1024);
        let reports = isotropic_asymptotics_check(&g, &AsymptoticsGrid::standard(1024)).unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::Pass), "{reports:#?}");
        let last = reports.iter().find(|r| r.k == Some(1023.0)).unwrap();
        assert!(last.ratio.is_finite() && last.ratio > 0.05 && last.ratio < 20.0);

        let l = iid(Marginal::laplace(1.0).unwrap(), 64);
        let reports = isotropic_asymptotics_check(&l, &AsymptoticsGrid::standard(64)).unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::HypothesisNotMet));
    }
}
