//! Sample-based estimation of order statistics of `(|X_1|, ..., |X_n|)`.
//!
//! Draws come in fixed chunks of [`rng::CHUNK_DRAWS`], each with its own
//! generator position. Chunks run in parallel and their accumulators are
//! merged in chunk order, so every estimate is bit-identical across thread
//! counts.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::models::VectorModel;
use crate::report::{BoundReport, Verdict, MC_SLACK_SIGMAS};
use crate::rng;
use crate::stats::{median_with_ci, wilson, Welford, Z95};

/// Smallest sample count for which an interval is reported.
pub const MIN_COUNT: usize = 1000;
/// Smallest pooled sample count for median estimation.
pub const MIN_MEDIAN_DRAWS: usize = 10_000;

fn desc(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        domain(format!("k must lie in 1..={n}, got {k}"))
    } else {
        Ok(())
    }
}

/// `k`-th largest of `|x_1|, ..., |x_n|`.
pub fn kth_max_abs(x: &[f64], k: usize) -> Result<f64> {
    check_k(x.len(), k)?;
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let (_, v, _) = a.select_nth_unstable_by(k - 1, desc);
    Ok(*v)
}

/// `k`-th smallest of `|x_1|, ..., |x_n|`, i.e. the `(n-k+1)`-th largest.
pub fn kth_min_abs(x: &[f64], k: usize) -> Result<f64> {
    check_k(x.len(), k)?;
    kth_max_abs(x, x.len() - k + 1)
}

/// `max_{|I|=k} Σ_{i∈I} |x_i|`.
pub fn topk_abs_sum(x: &[f64], k: usize) -> Result<f64> {
    check_k(x.len(), k)?;
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if k < a.len() {
        a.select_nth_unstable_by(k - 1, desc);
    }
    Ok(a[..k].iter().sum())
}

/// `N(s) = #{i : |x_i| >= s}`.
pub fn count_at_least(x: &[f64], s: f64) -> usize {
    x.iter().filter(|v| v.abs() >= s).count()
}

/// `∫_0^∞ min{k, N(s)} ds`, integrating the step function `N` exactly over
/// its breakpoints.
pub fn step_integral_topk(x: &[f64], k: usize) -> Result<f64> {
    check_k(x.len(), k)?;
    let mut z: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    z.sort_unstable_by(desc);
    z.push(0.0);
    // On (z_{l+1}, z_l] exactly l coordinates are >= s.
    Ok((0..z.len() - 1)
        .map(|l| ((l + 1).min(k) as f64) * (z[l] - z[l + 1]))
        .sum())
}

/// Counts `N(s)` on a grid of `s` values for a collection of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCounts {
    pub grid: Vec<f64>,
    /// `counts[j][g] = N_j(grid[g])` for sample `j`.
    pub counts: Vec<Vec<u32>>,
}

impl EmpiricalCounts {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>, grid: &[f64]) -> Result<Self> {
        if grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return domain("grid values must be finite and nonnegative");
        }
        let counts = rows
            .into_iter()
            .map(|x| grid.iter().map(|&s| count_at_least(x, s) as u32).collect())
            .collect();
        Ok(EmpiricalCounts { grid: grid.to_vec(), counts })
    }

    /// Empirical `P(N(grid[g]) >= l)`.
    pub fn prob_at_least(&self, g: usize, l: u32) -> f64 {
        let hits = self.counts.iter().filter(|c| c[g] >= l).count();
        hits as f64 / self.counts.len() as f64
    }

    /// Empirical `E N(grid[g])`.
    pub fn mean_count(&self, g: usize) -> f64 {
        self.counts.iter().map(|c| f64::from(c[g])).sum::<f64>() / self.counts.len() as f64
    }
}

/// A scalar functional of one draw of `X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    KMax(usize),
    KMin(usize),
    TopKSum(usize),
    /// `max_i |a_i X_i|^p`; `None` weights mean all ones.
    SupWeightedPow { weights: Option<Vec<f64>>, p: f64 },
}

impl Statistic {
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::KMax(k) => write!(f, "kmax:{k}"),
            Statistic::KMin(k) => write!(f, "kmin:{k}"),
            Statistic::TopKSum(k) => write!(f, "topk:{k}"),
            Statistic::SupWeightedPow { weights: None, p } => write!(f, "supw:{p}"),
            Statistic::SupWeightedPow { weights: Some(w), p } => {
                let w: Vec<String> = w.iter().map(f64::to_string).collect();
                write!(f, "supw:{p}:{}", w.join(","))
            }
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    /// `kmax:K`, `kmin:K`, `topk:K`, `supw:P` or `supw:P:A1,A2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognized statistic '{s}'"));
        let mut parts = s.splitn(3, ':');
        let name = parts.next().ok_or_else(bad)?;
        let arg = parts.next().ok_or_else(bad)?;
        let rest = parts.next();
        let int = || arg.trim().parse::<usize>().map_err(|_| bad());
        match (name.trim(), rest) {
            ("kmax", None) => Ok(Statistic::KMax(int()?)),
            ("kmin", None) => Ok(Statistic::KMin(int()?)),
            ("topk" | "topk_sum", None) => Ok(Statistic::TopKSum(int()?)),
            ("supw" | "sup_weighted", w) => {
                let p = arg.trim().parse::<f64>().map_err(|_| bad())?;
                let weights = w
                    .map(|w| w.split(',').map(|a| a.trim().parse::<f64>().map_err(|_| bad())).collect())
                    .transpose()?;
                Ok(Statistic::SupWeightedPow { weights, p })
            }
            _ => Err(bad()),
        }
    }
}

/// Evaluates a list of statistics on one row with at most one partial sort.
#[derive(Debug, Clone)]
pub(crate) struct StatPlan {
    stats: Vec<Statistic>,
    n: usize,
    top: usize,
    bottom: usize,
}

impl StatPlan {
    pub(crate) fn new(stats: &[Statistic], n: usize) -> Result<Self> {
        let (mut top, mut bottom) = (0, 0);
        for s in stats {
            match s {
                Statistic::KMax(k) | Statistic::TopKSum(k) => {
                    check_k(n, *k)?;
                    top = top.max(*k);
                }
                Statistic::KMin(k) => {
                    check_k(n, *k)?;
                    bottom = bottom.max(*k);
                }
                Statistic::SupWeightedPow { weights, p } => {
                    if !(p.is_finite() && *p > 0.0) {
                        return domain(format!("power must be positive, got {p}"));
                    }
                    if let Some(w) = weights {
                        if w.len() != n || w.iter().any(|a| !a.is_finite()) {
                            return domain(format!("need {n} finite weights, got {}", w.len()));
                        }
                    }
                }
            }
        }
        if stats.is_empty() {
            return domain("no statistic requested");
        }
        Ok(StatPlan { stats: stats.to_vec(), n, top, bottom })
    }

    /// Writes one value per statistic into `out`. Clobbers `row`.
    pub(crate) fn eval(&self, row: &mut [f64], out: &mut [f64]) {
        for (s, o) in self.stats.iter().zip(out.iter_mut()) {
            if let Statistic::SupWeightedPow { weights, p } = s {
                let m = match weights {
                    None => row.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                    Some(w) => row.iter().zip(w).fold(0.0f64, |m, (x, a)| m.max((a * x).abs())),
                };
                *o = m.powf(*p);
            }
        }
        if self.top + self.bottom == 0 {
            return;
        }
        for x in row.iter_mut() {
            *x = x.abs();
        }
        let n = self.n;
        if 2 * (self.top + self.bottom) >= n {
            row.sort_unstable_by(desc);
        } else {
            if self.top > 0 {
                row.select_nth_unstable_by(self.top - 1, desc);
                row[..self.top].sort_unstable_by(desc);
            }
            if self.bottom > 0 {
                let tail = &mut row[self.top..];
                let m = tail.len();
                tail.select_nth_unstable_by(m - self.bottom, desc);
                tail[m - self.bottom..].sort_unstable_by(desc);
            }
        }
        for (s, o) in self.stats.iter().zip(out.iter_mut()) {
            match s {
                Statistic::KMax(k) => *o = row[k - 1],
                Statistic::KMin(k) => *o = row[n - k],
                Statistic::TopKSum(k) => *o = row[..*k].iter().sum(),
                Statistic::SupWeightedPow { .. } => {}
            }
        }
    }
}

/// Mean, standard error and 95% interval of a Monte Carlo quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub count: usize,
    pub seed: u64,
    pub stat_id: String,
}

impl Estimate {
    pub(crate) fn from_welford(w: &Welford, seed: u64, stat_id: String) -> Self {
        let (mean, stderr) = (w.mean(), w.stderr());
        Estimate {
            mean,
            stderr,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
            count: w.count() as usize,
            seed,
            stat_id,
        }
    }
}

/// Sample count, seed, stream and worker count for one estimation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub count: usize,
    pub seed: u64,
    pub stream_id: u64,
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        RunConfig { count, seed, stream_id: 0, threads: None }
    }

    pub fn stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

fn refuse_below(count: usize, min: usize) -> Result<()> {
    if count < min {
        Err(Error::Refused(format!("{count} draws is below the minimum of {min} for an interval")))
    } else {
        Ok(())
    }
}

/// Runs `per_row` over every draw, one accumulator per chunk, returning the
/// accumulators in chunk order.
pub fn map_chunks<A, I, F>(model: &VectorModel, cfg: &RunConfig, init: I, per_row: F) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &mut [f64]) + Sync,
{
    let chunks: Vec<(u64, usize)> = rng::chunks(cfg.count).collect();
    let n = model.dim();
    let job = || -> Vec<A> {
        chunks
            .par_iter()
            .map_init(
                || (model.sampler(), vec![0.0; n]),
                |(sampler, row), &(chunk, draws)| {
                    let mut r = rng::chunk_rng(cfg.seed, cfg.stream_id, chunk);
                    let mut acc = init();
                    for _ in 0..draws {
                        sampler.draw(&mut r, row);
                        per_row(&mut acc, row);
                    }
                    acc
                },
            )
            .collect()
    };
    match cfg.threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Means of several statistics computed on the same draws.
pub fn estimate_many(model: &VectorModel, stats: &[Statistic], cfg: &RunConfig) -> Result<Vec<Estimate>> {
    refuse_below(cfg.count, MIN_COUNT)?;
    let plan = StatPlan::new(stats, model.dim())?;
    let m = stats.len();
    let parts = map_chunks(
        model,
        cfg,
        || (vec![Welford::new(); m], vec![0.0; m]),
        |(acc, vals), row| {
            plan.eval(row, vals);
            for (w, v) in acc.iter_mut().zip(vals.iter()) {
                w.push(*v);
            }
        },
    )?;
    let mut total = vec![Welford::new(); m];
    for (part, _) in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total
        .iter()
        .zip(stats)
        .map(|(w, s)| Estimate::from_welford(w, cfg.seed, s.id()))
        .collect())
}

/// `E stat(X)` from `count` draws.
pub fn estimate_mean(model: &VectorModel, stat: &Statistic, count: usize, seed: u64) -> Result<Estimate> {
    let mut v = estimate_many(model, std::slice::from_ref(stat), &RunConfig::new(count, seed))?;
    Ok(v.remove(0))
}

/// All values of `stat` over `count` draws of one stream, in draw order.
pub fn sample_statistic(model: &VectorModel, stat: &Statistic, cfg: &RunConfig) -> Result<Vec<f64>> {
    let plan = StatPlan::new(std::slice::from_ref(stat), model.dim())?;
    let parts = map_chunks(
        model,
        cfg,
        || Vec::with_capacity(rng::CHUNK_DRAWS),
        |vals: &mut Vec<f64>, row| {
            let mut out = [0.0];
            plan.eval(row, &mut out);
            vals.push(out[0]);
        },
    )?;
    Ok(parts.concat())
}

/// Median of `stat` pooled over `replications` independent streams of
/// `count` draws each. The interval is the exact binomial order-statistic
/// interval; `stderr` is its half-width divided by 1.96.
pub fn estimate_median(
    model: &VectorModel,
    stat: &Statistic,
    count: usize,
    replications: usize,
    seed: u64,
) -> Result<Estimate> {
    estimate_median_with(model, stat, count, replications, seed, None)
}

pub fn estimate_median_with(
    model: &VectorModel,
    stat: &Statistic,
    count: usize,
    replications: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Estimate> {
    refuse_below(count.saturating_mul(replications), MIN_MEDIAN_DRAWS)?;
    let mut all = Vec::with_capacity(count * replications);
    for r in 0..replications {
        let cfg = RunConfig::new(count, seed).stream(r as u64).threads(threads);
        all.extend(sample_statistic(model, stat, &cfg)?);
    }
    all.sort_unstable_by(f64::total_cmp);
    let (median, ci95) = median_with_ci(&all);
    Ok(Estimate {
        mean: median,
        stderr: (ci95.1 - ci95.0) / (2.0 * Z95),
        ci95,
        count: all.len(),
        seed,
        stat_id: format!("median({stat})"),
    })
}

/// Hit counts of `{k-max |X_i| >= u}` for each `u` in `levels`, on shared draws.
pub fn kmax_exceedances(model: &VectorModel, k: usize, levels: &[f64], cfg: &RunConfig) -> Result<Vec<u64>> {
    let plan = StatPlan::new(&[Statistic::KMax(k)], model.dim())?;
    let parts = map_chunks(
        model,
        cfg,
        || vec![0u64; levels.len()],
        |hits, row| {
            let mut out = [0.0];
            plan.eval(row, &mut out);
            for (h, &u) in hits.iter_mut().zip(levels) {
                *h += u64::from(out[0] >= u);
            }
        },
    )?;
    let mut total = vec![0u64; levels.len()];
    for p in parts {
        for (t, h) in total.iter_mut().zip(p) {
            *t += h;
        }
    }
    Ok(total)
}

fn proportion_estimate(hits: u64, count: usize, seed: u64, stat_id: String) -> Estimate {
    let p = hits as f64 / count as f64;
    Estimate {
        mean: p,
        stderr: (p * (1.0 - p) / count as f64).sqrt(),
        ci95: wilson(hits, count as u64, Z95),
        count,
        seed,
        stat_id,
    }
}

/// `P(k-max |X_i| >= u)` with a Wilson interval.
pub fn tail_probability(model: &VectorModel, k: usize, u: f64, count: usize, seed: u64) -> Result<Estimate> {
    refuse_below(count, MIN_COUNT)?;
    let hits = kmax_exceedances(model, k, &[u], &RunConfig::new(count, seed))?;
    Ok(proportion_estimate(hits[0], count, seed, format!("P(kmax:{k} >= {u})")))
}

/// Checks `P(k-max >= u t) <= P(k-max >= t)^u` on a grid, for unconditional
/// log-concave models. Slack is 3 delta-method standard errors of the
/// difference.
pub fn tail_power_check(
    model: &VectorModel,
    k: usize,
    t_grid: &[f64],
    u_grid: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<BoundReport>> {
    refuse_below(cfg.count, MIN_COUNT)?;
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) || u_grid.iter().any(|u| !(u.is_finite() && *u > 1.0)) {
        return domain("need t > 0 and u > 1");
    }
    let mut levels = t_grid.to_vec();
    for &t in t_grid {
        levels.extend(u_grid.iter().map(|u| u * t));
    }
    let hits = kmax_exceedances(model, k, &levels, cfg)?;
    let nf = cfg.count as f64;
    let h = model.hypotheses();
    let mut out = Vec::new();
    for (a, &t) in t_grid.iter().enumerate() {
        let p = hits[a] as f64 / nf;
        for (b, &u) in u_grid.iter().enumerate() {
            let q = hits[t_grid.len() + a * u_grid.len() + b] as f64 / nf;
            let rhs = p.powf(u);
            let se = (q * (1.0 - q) / nf + (u * p.powf(u - 1.0)).powi(2) * p * (1.0 - p) / nf).sqrt();
            let mut r = BoundReport::new("lem65", model.label(), model.dim())
                .with_k(k as f64)
                .with_seed(cfg.seed)
                .upper(q, se, rhs)
                .with_note(format!("t={t}, u={u}"));
            if !(h.unconditional && h.log_concave) {
                r = r.unmet(format!("not unconditional log-concave; t={t}, u={u}"));
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// Checks both integration-by-parts identities for the top-`k` sum and the
/// excess sum `Σ |X_i| 1{|X_i| >= t}`:
///
/// * `byparts.topk_step`: per-sample, `Σ_{l<=k} z_l` against the exact step
///   integral of `min{k, N(s)}`; the reported lhs is the largest relative
///   deviation, which must be at most `1e-9`.
/// * `byparts.excess`: the direct excess-sum estimator against
///   `t N(t) + Σ_l (z_l - t)_+` on shared draws, difference within 3 sigma.
/// * `byparts.excess_analytic`: the direct estimator against
///   `Σ_i E|X_i| 1{|X_i| >= t}` from the marginals, within 3 sigma.
pub fn byparts_identity_check(
    model: &VectorModel,
    k: usize,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    refuse_below(count, MIN_COUNT)?;
    let n = model.dim();
    check_k(n, k)?;
    if !(t.is_finite() && t >= 0.0) {
        return domain(format!("t must be finite and nonnegative, got {t}"));
    }
    #[derive(Default)]
    struct Acc {
        worst: f64,
        topk: Welford,
        direct: Welford,
        layered: Welford,
        diff: Welford,
    }
    let parts = map_chunks(model, &RunConfig::new(count, seed), Acc::default, |acc, row| {
        let direct: f64 = row.iter().map(|x| x.abs()).filter(|a| *a >= t).sum();
        let step = step_integral_topk(row, k).expect("k checked");
        for x in row.iter_mut() {
            *x = x.abs();
        }
        row.sort_unstable_by(desc);
        let topk: f64 = row[..k].iter().sum();
        let dev = (topk - step).abs() / topk.abs().max(1.0);
        acc.worst = acc.worst.max(dev);
        let n_t = row.iter().take_while(|z| **z >= t).count();
        let layered = t * n_t as f64 + row[..n_t].iter().map(|z| z - t).sum::<f64>();
        acc.topk.push(topk);
        acc.direct.push(direct);
        acc.layered.push(layered);
        acc.diff.push(direct - layered);
    })?;
    let mut total = Acc::default();
    for p in &parts {
        total.worst = total.worst.max(p.worst);
        total.topk.merge(&p.topk);
        total.direct.merge(&p.direct);
        total.layered.merge(&p.layered);
        total.diff.merge(&p.diff);
    }
    let label = model.label();
    let mut out = Vec::new();

    let mut step = BoundReport::new("byparts.topk_step", label.clone(), n).with_k(k as f64).with_seed(seed);
    step.lhs = total.worst;
    step.rhs = 1e-9;
    step.ratio = total.worst / 1e-9;
    step.verdict = Verdict::from_bool(total.worst <= 1e-9);
    step.tolerance_policy = "per-sample exact, rel 1e-9".into();
    step.note = format!("E topk = {} +- {}", total.topk.mean(), total.topk.stderr());
    out.push(step);

    let (a, b) = (total.direct.mean(), total.layered.mean());
    let se = total.diff.stderr();
    let mut excess = BoundReport::new("byparts.excess", label.clone(), n).with_k(k as f64).with_seed(seed);
    excess.lhs = a;
    excess.lhs_stderr = se;
    excess.rhs = b;
    excess.ratio = a / b;
    excess.verdict = Verdict::from_bool((a - b).abs() <= MC_SLACK_SIGMAS * se + 1e-12 * a.abs().max(1.0));
    excess.tolerance_policy = "shared-draw difference, 3 sigma".into();
    excess.note = format!("t={t}");
    out.push(excess);

    if let Ok(marginals) = model.marginals() {
        let mut analytic = 0.0;
        for m in &marginals {
            analytic += m.truncated_abs_mean(t)?;
        }
        let se = total.direct.stderr();
        let mut r = BoundReport::new("byparts.excess_analytic", label, n).with_k(k as f64).with_seed(seed);
        r.lhs = a;
        r.lhs_stderr = se;
        r.rhs = analytic;
        r.ratio = a / analytic;
        r.verdict = Verdict::from_bool((a - analytic).abs() <= MC_SLACK_SIGMAS * se + 1e-12 * analytic.abs().max(1.0));
        r.tolerance_policy = "two-sided, 3 sigma".into();
        r.note = format!("t={t}");
        out.push(r);
    }
    Ok(out)
}
