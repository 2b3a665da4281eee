//! Inequality checks for random vectors, computed from shared Monte Carlo
//! evidence.
//!
//! [`Evidence::gather`] draws a model once and estimates every order
//! statistic the checks need for a list of orders `k`. The `*_report`
//! functions turn evidence into [`BoundReport`]s; the `check_*` functions
//! are single-call conveniences that gather their own evidence.

use crate::error::{domain, Error, Result};
use crate::marginals::Marginal;
use crate::models::{estimate_negcorr_alpha, Hypotheses, VectorModel};
use crate::montecarlo::{estimate_many, map_chunks, Estimate, RunConfig, StatPlan, Statistic, MIN_COUNT};
use crate::report::{BoundReport, Verdict};
use crate::rng::derive_seed;
use crate::stats::{median_with_ci, Welford, Z95};
use crate::thresholds::{MarginalGroups, ThresholdKind};
use crate::verify::calibration::Calibration;

/// Probability gap for the tail-multiplier check: the reported multiplier is
/// the smallest grid `u` with `P(k-max >= u t*(k - 1/2)) <= 1 - C_HAT`.
pub const C_HAT: f64 = 0.25;

/// Largest admissible relative standard error of a p-th moment estimate.
pub const MAX_MOMENT_REL_STDERR: f64 = 0.05;

/// `u = 0, 0.25, ..., 8`.
pub fn multiplier_grid() -> Vec<f64> {
    (0..=32).map(|i| 0.25 * i as f64).collect()
}

/// `c(α) = (36 (5 + 4α)(1 + 2α))^{-1}`.
pub fn c_alpha(alpha: f64) -> f64 {
    1.0 / (36.0 * (5.0 + 4.0 * alpha) * (1.0 + 2.0 * alpha))
}

/// Levels `k - k^{5/6} / 2` used by the reversed k-max bound.
pub fn reversed_level(k: f64) -> f64 {
    k - 0.5 * k.powf(5.0 / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub count: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl CheckOptions {
    pub fn new(count: usize, seed: u64) -> Self {
        CheckOptions { count, seed, threads: None }
    }
}

/// Estimates and thresholds for one order `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEvidence {
    pub k: usize,
    pub topk: Estimate,
    pub kmax: Estimate,
    pub kmin: Estimate,
    pub median_kmax: Estimate,
    /// `t(k, X)`.
    pub t: f64,
    /// `t*(k, X)`.
    pub tstar: f64,
    /// `t*(k - 1/2, X)`.
    pub tstar_half: f64,
    /// `t*(k - k^{5/6}/2, X)`.
    pub tstar_rev: f64,
    /// Hits of `k-max >= u t*(k - 1/2)` for `u` in [`multiplier_grid`].
    pub multiplier_hits: Vec<u64>,
}

/// All draws-based quantities for one model.
#[derive(Debug, Clone)]
pub struct Evidence {
    pub model: VectorModel,
    pub label: String,
    pub n: usize,
    pub hypotheses: Hypotheses,
    pub marginals: Vec<Marginal>,
    /// Seed the draws were made with.
    pub seed: u64,
    pub count: usize,
    pub orders: Vec<OrderEvidence>,
}

#[derive(Default)]
struct GatherAcc {
    moments: Vec<Welford>,
    kmax_values: Vec<Vec<f64>>,
    hits: Vec<u64>,
    scratch: Vec<f64>,
}

impl Evidence {
    /// One pass of `opts.count` draws. The draw seed is derived from
    /// `opts.seed`, the model label and the dimension.
    pub fn gather(model: &VectorModel, ks: &[usize], opts: &CheckOptions) -> Result<Self> {
        if opts.count < MIN_COUNT {
            return Err(Error::Refused(format!("{} draws is below the minimum of {MIN_COUNT}", opts.count)));
        }
        let n = model.dim();
        let label = model.label();
        let marginals = model.marginals()?;
        let groups = MarginalGroups::new(&marginals)?;
        let seed = derive_seed(opts.seed, &format!("{label}|{n}"));
        let us = multiplier_grid();

        let mut orders = Vec::new();
        let mut stats = Vec::new();
        let mut levels = Vec::new();
        for &k in ks {
            if k == 0 || k > n {
                return domain(format!("k must lie in 1..={n}, got {k}"));
            }
            let kf = k as f64;
            let solve = |kind, level: f64| groups.solve(kind, level).map(|r| r.value);
            let tstar_half = solve(ThresholdKind::TStar, kf - 0.5)?;
            levels.extend(us.iter().map(|u| u * tstar_half));
            stats.extend([Statistic::TopKSum(k), Statistic::KMax(k), Statistic::KMin(k)]);
            let t = solve(ThresholdKind::T, kf)?;
            let tstar = solve(ThresholdKind::TStar, kf)?;
            let tstar_rev = solve(ThresholdKind::TStar, reversed_level(kf))?;
            orders.push((k, t, tstar, tstar_half, tstar_rev));
        }
        let m = ks.len();
        let plan = StatPlan::new(&stats, n)?;
        let cfg = RunConfig::new(opts.count, seed).threads(opts.threads);
        let parts = map_chunks(
            model,
            &cfg,
            || GatherAcc {
                moments: vec![Welford::new(); 3 * m],
                kmax_values: vec![Vec::new(); m],
                hits: vec![0; m * us.len()],
                scratch: vec![0.0; 3 * m],
            },
            |acc, row| {
                plan.eval(row, &mut acc.scratch);
                for (w, v) in acc.moments.iter_mut().zip(&acc.scratch) {
                    w.push(*v);
                }
                for j in 0..m {
                    let kmax = acc.scratch[3 * j + 1];
                    acc.kmax_values[j].push(kmax);
                    for (h, level) in acc.hits[j * us.len()..(j + 1) * us.len()]
                        .iter_mut()
                        .zip(&levels[j * us.len()..(j + 1) * us.len()])
                    {
                        *h += u64::from(kmax >= *level);
                    }
                }
            },
        )?;
        let mut total = GatherAcc {
            moments: vec![Welford::new(); 3 * m],
            kmax_values: vec![Vec::with_capacity(opts.count); m],
            hits: vec![0; m * us.len()],
            scratch: Vec::new(),
        };
        for p in parts {
            for (t, w) in total.moments.iter_mut().zip(&p.moments) {
                t.merge(w);
            }
            for (t, v) in total.kmax_values.iter_mut().zip(p.kmax_values) {
                t.extend(v);
            }
            for (t, h) in total.hits.iter_mut().zip(p.hits) {
                *t += h;
            }
        }
        let orders = orders
            .into_iter()
            .enumerate()
            .map(|(j, (k, t, tstar, tstar_half, tstar_rev))| {
                let mut values = std::mem::take(&mut total.kmax_values[j]);
                values.sort_unstable_by(f64::total_cmp);
                let (median, ci95) = median_with_ci(&values);
                let est = |i: usize| Estimate::from_welford(&total.moments[3 * j + i], seed, stats[3 * j + i].id());
                OrderEvidence {
                    k,
                    topk: est(0),
                    kmax: est(1),
                    kmin: est(2),
                    median_kmax: Estimate {
                        mean: median,
                        stderr: (ci95.1 - ci95.0) / (2.0 * Z95),
                        ci95,
                        count: values.len(),
                        seed,
                        stat_id: format!("median(kmax:{k})"),
                    },
                    t,
                    tstar,
                    tstar_half,
                    tstar_rev,
                    multiplier_hits: total.hits[j * us.len()..(j + 1) * us.len()].to_vec(),
                }
            })
            .collect();
        Ok(Evidence {
            model: model.clone(),
            label,
            n,
            hypotheses: model.hypotheses(),
            marginals,
            seed,
            count: opts.count,
            orders,
        })
    }

    pub fn order(&self, k: usize) -> Option<&OrderEvidence> {
        self.orders.iter().find(|o| o.k == k)
    }

    fn row(&self, id: &str, o: &OrderEvidence) -> BoundReport {
        BoundReport::new(id, self.label.clone(), self.n).with_k(o.k as f64).with_seed(self.seed)
    }
}

/// Applies a calibrated window, or records the ratio when none exists.
fn calibrated(
    r: BoundReport,
    cal: &Calibration,
    id: &str,
    lhs: f64,
    se: f64,
    rhs: f64,
    cap_applies: bool,
) -> BoundReport {
    match cal.window(id) {
        Some(w) => r.window(lhs, se, rhs, w.floor, if cap_applies { w.cap } else { f64::INFINITY }),
        None => r.informational(lhs, se, rhs).with_note("no calibrated window"),
    }
}

/// `E max_{|I|=k} Σ |X_i| <= 2k t(k)`; holds for every integrable vector.
pub fn prop_upper_report(ev: &Evidence, o: &OrderEvidence) -> BoundReport {
    let k = o.k as f64;
    ev.row("prop11", o).upper(o.topk.mean, o.topk.stderr, 2.0 * k * o.t)
}

/// Outcome of checking the joint-tail condition with constant `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaStatus {
    Verified(String),
    Unverified(String),
}

/// Independent coordinates satisfy the condition with `α = 1`. Otherwise
/// the condition is estimated on a grid of thresholds and accepted when the
/// estimate is at most `alpha` within 3 standard errors.
pub fn verify_alpha(model: &VectorModel, alpha: f64, opts: &CheckOptions) -> Result<AlphaStatus> {
    if !(alpha >= 1.0) {
        return domain(format!("alpha must be at least 1, got {alpha}"));
    }
    let h = model.hypotheses();
    if h.independent {
        return Ok(AlphaStatus::Verified("independent coordinates".into()));
    }
    if model.dim() < 2 {
        return Ok(AlphaStatus::Verified("single coordinate".into()));
    }
    let scale = model.marginals()?.iter().map(Marginal::scale).fold(0.0, f64::max);
    let grid: Vec<f64> = [0.25, 0.5, 1.0, 1.5, 2.0, 2.5].iter().map(|g| g * scale).collect();
    let seed = derive_seed(opts.seed, &format!("alpha|{}", model.label()));
    match estimate_negcorr_alpha(model, &grid, opts.count, seed) {
        Ok(e) if e.alpha - 3.0 * e.stderr <= alpha => Ok(AlphaStatus::Verified(format!(
            "estimated alpha {:.4} +- {:.4} on a {}-cell grid",
            e.alpha, e.stderr, e.cells_used
        ))),
        Ok(e) => Ok(AlphaStatus::Unverified(format!(
            "estimated alpha {:.4} +- {:.4} exceeds {alpha} at cell {:?}",
            e.alpha, e.stderr, e.argmax
        ))),
        Err(e) => Ok(AlphaStatus::Unverified(format!("alpha not estimable: {e}"))),
    }
}

/// `c(α) k t(k) <= E topk <= 2k t(k)`. The reported ratio is the margin
/// `E topk / (c(α) k t(k))`; the verdict requires both sides.
pub fn negcorr_report(ev: &Evidence, o: &OrderEvidence, alpha: f64, status: &AlphaStatus) -> BoundReport {
    let k = o.k as f64;
    let upper = 2.0 * k * o.t;
    let mut r = ev.row("thm12", o).lower(o.topk.mean, o.topk.stderr, c_alpha(alpha) * k * o.t);
    if r.verdict == Verdict::Pass && o.topk.mean > upper + 3.0 * o.topk.stderr {
        r.verdict = Verdict::Fail;
    }
    r.tolerance_policy = "two-sided, 3 sigma; ratio is the lower-bound margin".into();
    match status {
        AlphaStatus::Verified(note) => r.with_note(format!("alpha={alpha}: {note}")),
        AlphaStatus::Unverified(why) => r.unmet(why.clone()),
    }
}

/// `E topk / (k t(k))` for log-concave vectors with uncorrelated coordinates,
/// against the calibrated floor and cap.
pub fn logconcave_report(ev: &Evidence, o: &OrderEvidence, cal: &Calibration) -> BoundReport {
    let id = "thm13.ratio";
    let k = o.k as f64;
    let h = &ev.hypotheses;
    let r = calibrated(ev.row(id, o), cal, id, o.topk.mean, o.topk.stderr, k * o.t, true);
    if !h.uncorrelated {
        r.unmet("coordinates are correlated")
    } else if !h.log_concave {
        r.illustration("only the marginals are log-concave; the lower bound is not expected to hold for n >> k")
    } else {
        r
    }
}

fn order_stat_hypotheses(h: &Hypotheses) -> Option<&'static str> {
    if !h.log_concave {
        Some("not log-concave")
    } else if !h.uncorrelated {
        Some("coordinates are correlated")
    } else if !h.mean_zero {
        Some("not mean zero")
    } else {
        None
    }
}

/// `E k-max >= Med(k-max) / 2` (any model) and the ratio
/// `E k-max / t*(k - 1/2)` (floor always, cap for unconditional models).
pub fn kmax_reports(ev: &Evidence, o: &OrderEvidence, cal: &Calibration) -> Vec<BoundReport> {
    let half_med = 0.5 * o.median_kmax.mean;
    let se = o.kmax.stderr.hypot(0.5 * o.median_kmax.stderr);
    let chain = ev.row("thm14.chain", o).lower(o.kmax.mean, se, half_med);
    let id = "thm14.ratio";
    let mut ratio = calibrated(
        ev.row(id, o),
        cal,
        id,
        o.kmax.mean,
        o.kmax.stderr,
        o.tstar_half,
        ev.hypotheses.unconditional,
    );
    if let Some(why) = order_stat_hypotheses(&ev.hypotheses) {
        ratio = ratio.unmet(why);
    }
    vec![chain, ratio]
}

/// Smallest multiplier on the grid with `P(k-max >= u t*(k-1/2)) <= 1 - ĉ`,
/// and `E k-max / t*(k - k^{5/6}/2)`.
pub fn revkmax_reports(ev: &Evidence, o: &OrderEvidence, cal: &Calibration) -> Vec<BoundReport> {
    let us = multiplier_grid();
    let nf = ev.count as f64;
    let found = us
        .iter()
        .zip(&o.multiplier_hits)
        .find(|(_, h)| **h as f64 / nf <= 1.0 - C_HAT);
    let (u, p) = match found {
        Some((u, h)) => (*u, *h as f64 / nf),
        None => (f64::INFINITY, *o.multiplier_hits.last().unwrap_or(&0) as f64 / nf),
    };
    let id = "thm15.multiplier";
    let mut mult = calibrated(ev.row(id, o), cal, id, u, 0.0, 1.0, true);
    mult.note = format!("P(kmax >= {u} t*(k-1/2)) = {p}, c_hat = {C_HAT}");
    let id = "thm15.mean_ratio";
    let mut mean = calibrated(ev.row(id, o), cal, id, o.kmax.mean, o.kmax.stderr, o.tstar_rev, true);
    mean.note = format!("level {}", reversed_level(o.k as f64));
    if let Some(why) = order_stat_hypotheses(&ev.hypotheses) {
        mult = mult.unmet(why);
        mean = mean.unmet(why);
    }
    vec![mult, mean]
}

/// For isotropic log-concave vectors and `k <= n/2`: `E k-max / t*(k)`,
/// `E k-max / t(k)` and `E k-min n / k`.
pub fn isotropic_reports(ev: &Evidence, o: &OrderEvidence, cal: &Calibration) -> Vec<BoundReport> {
    let (n, k) = (ev.n as f64, o.k as f64);
    let h = &ev.hypotheses;
    let mut out = vec![
        calibrated(ev.row("cor16.kmax_tstar", o), cal, "cor16.kmax_tstar", o.kmax.mean, o.kmax.stderr, o.tstar, true),
        calibrated(ev.row("cor16.kmax_t", o), cal, "cor16.kmax_t", o.kmax.mean, o.kmax.stderr, o.t, true),
    ];
    let id = "cor16.kmin";
    let kmin = ev.row(id, o);
    let kmin = if h.unconditional {
        calibrated(kmin, cal, id, o.kmin.mean, o.kmin.stderr, k / n, true)
    } else {
        match cal.window(id) {
            Some(w) => {
                let cap = w.cap * (1.0 + n.powf(5.0 / 6.0) / k);
                kmin.window(o.kmin.mean, o.kmin.stderr, k / n, w.floor, cap)
                    .with_note("not unconditional: cap widened by 1 + n^{5/6}/k")
            }
            None => kmin.informational(o.kmin.mean, o.kmin.stderr, k / n),
        }
    };
    out.push(kmin);
    let why = if !h.isotropic {
        Some("not isotropic")
    } else if !h.log_concave {
        Some("not log-concave")
    } else if 2 * o.k > ev.n {
        Some("k > n/2")
    } else {
        None
    };
    match why {
        Some(why) => out.into_iter().map(|r| r.unmet(why)).collect(),
        None => out,
    }
}

/// Weak against strong moments of the weighted supremum:
/// `(E max|a_i X_i|^p)^{1/p} <= Ĉ (E max|a_i X_i| + max_i ||a_i X_i||_p)`.
/// Reports `Ĉ` per `p`. Fails with `Refused` if a p-th moment estimate has
/// relative standard error above 5%.
pub fn weak_strong_reports(
    model: &VectorModel,
    weights: Option<&[f64]>,
    p_grid: &[f64],
    opts: &CheckOptions,
    cal: &Calibration,
) -> Result<Vec<BoundReport>> {
    let n = model.dim();
    if let Some(w) = weights {
        if w.len() != n {
            return domain(format!("need {n} weights, got {}", w.len()));
        }
    }
    if p_grid.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
        return domain("moment orders must be at least 1");
    }
    let label = model.label();
    let seed = derive_seed(opts.seed, &format!("weakstrong|{label}|{n}"));
    let w = weights.map(<[f64]>::to_vec);
    let mut stats = vec![Statistic::SupWeightedPow { weights: w.clone(), p: 1.0 }];
    stats.extend(p_grid.iter().map(|&p| Statistic::SupWeightedPow { weights: w.clone(), p }));
    let est = estimate_many(model, &stats, &RunConfig::new(opts.count, seed).threads(opts.threads))?;
    let marginals = model.marginals()?;
    let mut distinct: Vec<&Marginal> = Vec::new();
    for m in &marginals {
        if !distinct.contains(&m) {
            distinct.push(m);
        }
    }
    let mut beta: f64 = 0.0;
    for m in &distinct {
        if !m.is_degenerate() {
            beta = beta.max(m.moment_doubling_constant(&[2.0, 3.0, 4.0, 6.0, 8.0])?);
        }
    }
    let h = model.hypotheses();
    let sup_mean = est[0].mean;
    let mut out = Vec::new();
    for (&p, e) in p_grid.iter().zip(&est[1..]) {
        if e.stderr > MAX_MOMENT_REL_STDERR * e.mean {
            return Err(Error::Refused(format!(
                "p = {p}: relative standard error {:.3} of the moment estimate exceeds {MAX_MOMENT_REL_STDERR}",
                e.stderr / e.mean
            )));
        }
        let lhs = e.mean.powf(1.0 / p);
        let se = e.stderr / (p * e.mean.powf((p - 1.0) / p));
        let mut strong: f64 = 0.0;
        for (i, m) in marginals.iter().enumerate() {
            let a = weights.map_or(1.0, |w| w[i]).abs();
            if a > 0.0 && !m.is_degenerate() {
                strong = strong.max(a * m.moment_p(p)?);
            }
        }
        let id = "weakstrong.C";
        let r = BoundReport::new(id, label.clone(), n).with_k(p).with_seed(seed);
        let mut r = calibrated(r, cal, id, lhs, se, sup_mean + strong, true);
        r.note = format!("p={p}, beta={beta:.4}");
        if !h.mean_zero {
            r = r.unmet("not centered");
        } else if !h.independent {
            r = r.unmet("joint-tail condition not verified for dependent coordinates");
        }
        out.push(r);
    }
    Ok(out)
}

fn single_order(model: &VectorModel, k: usize, count: usize, seed: u64) -> Result<Evidence> {
    Evidence::gather(model, &[k], &CheckOptions::new(count, seed))
}

/// Upper bound for the expected top-`k` sum.
pub fn check_prop_upper(model: &VectorModel, k: usize, count: usize, seed: u64) -> Result<BoundReport> {
    let ev = single_order(model, k, count, seed)?;
    Ok(prop_upper_report(&ev, &ev.orders[0]))
}

/// Two-sided bound for vectors satisfying the joint-tail condition with `alpha`.
pub fn check_thm_negcorr(model: &VectorModel, k: usize, alpha: f64, count: usize, seed: u64) -> Result<BoundReport> {
    let status = verify_alpha(model, alpha, &CheckOptions::new(count, seed))?;
    let ev = single_order(model, k, count, seed)?;
    Ok(negcorr_report(&ev, &ev.orders[0], alpha, &status))
}

/// Ratio for log-concave vectors with uncorrelated coordinates.
pub fn check_thm_logconcave(model: &VectorModel, k: usize, count: usize, seed: u64) -> Result<BoundReport> {
    let ev = single_order(model, k, count, seed)?;
    Ok(logconcave_report(&ev, &ev.orders[0], &Calibration::frozen()))
}

/// Median chain and k-max ratio.
pub fn check_thm_kmax(model: &VectorModel, k: usize, count: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let ev = single_order(model, k, count, seed)?;
    Ok(kmax_reports(&ev, &ev.orders[0], &Calibration::frozen()))
}

/// Tail multiplier and reversed-level mean ratio.
pub fn check_thm_revkmax(model: &VectorModel, k: usize, count: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let ev = single_order(model, k, count, seed)?;
    Ok(revkmax_reports(&ev, &ev.orders[0], &Calibration::frozen()))
}

/// Isotropic k-max and k-min ratios over `k_grid`.
pub fn check_cor_isotropic(model: &VectorModel, k_grid: &[usize], count: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let ev = Evidence::gather(model, k_grid, &CheckOptions::new(count, seed))?;
    let cal = Calibration::frozen();
    Ok(ev.orders.iter().flat_map(|o| isotropic_reports(&ev, o, &cal)).collect())
}

/// Weak and strong moments of the weighted supremum.
pub fn check_weak_strong(
    model: &VectorModel,
    weights: Option<&[f64]>,
    p_grid: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    weak_strong_reports(model, weights, p_grid, &CheckOptions::new(count, seed), &Calibration::frozen())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn constants() {
        assert_eq!(c_alpha(1.0), 1.0 / 972.0);
        assert_eq!(reversed_level(1.0), 0.5);
        assert!((reversed_level(64.0) - 48.0).abs() < 1e-12);
        let g = multiplier_grid();
        assert_eq!((g[0], g[32], g.len()), (0.0, 8.0, 33));
    }

    #[test]
    fn prop_upper_examples() {
        let ex1 = VectorModel::sign_shared_gaussian(1024).unwrap();
        let r = check_prop_upper(&ex1, 16, 20_000, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.rhs - 78.8).abs() < 0.1, "{}", r.rhs);
        assert!((r.ratio - 0.162).abs() < 0.005, "{}", r.ratio);

        let lap = VectorModel::iid(Marginal::laplace(1.0).unwrap(), 100).unwrap();
        let r = check_prop_upper(&lap, 10, 5000, 2).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.rhs - 52.52).abs() < 0.02);

        let full = VectorModel::iid(Marginal::uniform(1.0).unwrap(), 6).unwrap();
        let r = check_prop_upper(&full, 6, 5000, 3).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.lhs - 3.0).abs() < 3.0 * r.lhs_stderr + 1e-12);
    }

    #[test]
    fn negcorr_margin_on_independent_gaussians() {
        let m = VectorModel::iid(Marginal::gaussian(1.0).unwrap(), 256).unwrap();
        let r = check_thm_negcorr(&m, 8, 1.0, 5000, 4).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.ratio > 100.0, "{}", r.ratio);
        let r = check_thm_negcorr(&m, 256, 1.0, 2000, 4).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);

        let ex2 = VectorModel::fully_correlated_gaussian(16).unwrap();
        let r = check_thm_negcorr(&ex2, 4, 1.0, 5000, 4).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisNotMet);
    }

    #[test]
    fn example1_is_an_illustration_under_logconcave_check() {
        let ex1 = VectorModel::sign_shared_gaussian(1024).unwrap();
        let r = check_thm_logconcave(&ex1, 16, 20_000, 5).unwrap();
        assert_eq!(r.verdict, Verdict::Informational);
        assert!(!r.hypotheses_met);
        assert!((r.ratio - 0.324).abs() < 0.01, "{}", r.ratio);
    }

    #[test]
    fn kmax_chain_and_gaussian_level() {
        let m = VectorModel::iid(Marginal::gaussian(1.0).unwrap(), 100).unwrap();
        let ev = single_order(&m, 1, 20_000, 6).unwrap();
        let o = &ev.orders[0];
        let expected = Normal::standard().inverse_cdf(1.0 - 1.0 / 400.0);
        assert!((o.tstar_half - expected).abs() < 1e-9);
        assert!(o.kmax.mean > 2.4 && o.kmax.mean < 2.8, "{}", o.kmax.mean);
        let reports = kmax_reports(&ev, o, &Calibration::frozen());
        assert_eq!(reports[0].verdict, Verdict::Pass);
        assert_ne!(reports[1].verdict, Verdict::Fail);
    }

    #[test]
    fn revkmax_multiplier_and_level() {
        let m = VectorModel::iid(Marginal::laplace(1.0).unwrap(), 1024).unwrap();
        let ev = single_order(&m, 64, 2000, 7).unwrap();
        let o = &ev.orders[0];
        assert!((o.tstar_rev - (1024f64 / 48.0).ln()).abs() < 1e-9);
        assert_eq!(o.multiplier_hits[0], 2000);
        let r = revkmax_reports(&ev, o, &Calibration::frozen());
        assert!(r[0].lhs.is_finite() && r[0].lhs > 0.0);
    }

    #[test]
    fn uniform_cube_minimum() {
        let m = VectorModel::uniform_cube(64, 3f64.sqrt()).unwrap();
        let ev = single_order(&m, 1, 100_000, 8).unwrap();
        let o = &ev.orders[0];
        let exact = 3f64.sqrt() / 65.0;
        assert!((o.kmin.mean - exact).abs() <= 3.0 * o.kmin.stderr, "{} vs {exact}", o.kmin.mean);
    }

    #[test]
    fn weak_strong_single_coordinate_and_laplace() {
        let one = VectorModel::iid(Marginal::laplace(1.0).unwrap(), 1).unwrap();
        let r = check_weak_strong(&one, None, &[2.0, 3.0], 20_000, 9).unwrap();
        assert!(matches!(check_weak_strong(&one, None, &[8.0], 20_000, 9), Err(Error::Refused(_))));
        assert!(r.iter().all(|r| r.ratio <= 1.0));
        let lap = VectorModel::iid(Marginal::laplace(1.0).unwrap(), 64).unwrap();
        let r = check_weak_strong(&lap, None, &[4.0], 20_000, 9).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].ratio > 0.0 && r[0].ratio < 2.0);
        assert!(r[0].note.contains("beta"));
    }

    #[test]
    fn gather_rejects_bad_orders() {
        let m = VectorModel::iid(Marginal::gaussian(1.0).unwrap(), 4).unwrap();
        assert!(Evidence::gather(&m, &[5], &CheckOptions::new(2000, 1)).is_err());
        assert!(matches!(
            Evidence::gather(&m, &[1], &CheckOptions::new(10, 1)),
            Err(Error::Refused(_))
        ));
    }
}
