use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, Normal};

use orderstat_core::marginals::Marginal;
use orderstat_core::montecarlo::{estimate_mean, Statistic};
use orderstat_core::report::{write_csv, BoundReport, Verdict};
use orderstat_core::thresholds::{t_threshold, tstar_threshold};
use orderstat_core::verify::calibration::CALIBRATED_IDS;
use orderstat_core::verify::identities::{byparts_suite, step_identity_check};
use orderstat_core::verify::lemmas::lemma_grid;
use orderstat_core::verify::suite::{run_suite, GridConfig, Suite, SuiteConfig, DEFAULT_SAMPLES};
use orderstat_core::VectorModel;

const SUITE_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn topk_mean(model: &VectorModel, k: usize, count: usize, seed: u64) -> (f64, f64) {
    let e = estimate_mean(model, &Statistic::TopKSum(k), count, seed).expect("estimate");
    (e.mean, e.stderr)
}

fn exact_examples() -> Outcome {
    let start = Instant::now();
    let exact = |k: usize| k as f64 * (2.0 / std::f64::consts::PI).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, n, k) in [("example1", 1024, 16), ("example1", 256, 4), ("example2", 1024, 16), ("example2", 256, 4)] {
        let model = if name == "example1" {
            VectorModel::sign_shared_gaussian(n)
        } else {
            VectorModel::fully_correlated_gaussian(n)
        }
        .unwrap();
        let (m, se) = topk_mean(&model, k, 1_000_000, 101);
        let z = (m - exact(k)) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("{name} n={n} k={k} z={z:.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && secs < 30.0, format!("{}; {secs:.1}s", parts.join(", ")))
}

fn counterexample_trend() -> Outcome {
    let k = 16;
    let mut prev: Option<(f64, f64)> = None;
    let mut ok = true;
    let mut first = 0.0;
    let mut parts = Vec::new();
    for e in 6..=16 {
        let n = 1usize << e;
        let model = VectorModel::sign_shared_gaussian(n).unwrap();
        let t = t_threshold(&model.marginals().unwrap(), k as f64).unwrap().value;
        let (m, se) = topk_mean(&model, k, 20_000, 200 + e as u64);
        let (ratio, rse) = (m / (k as f64 * t), se / (k as f64 * t));
        if n == 1024 {
            first = ratio;
        }
        if let Some((r0, s0)) = prev {
            ok &= r0 - ratio > 3.0 * s0.hypot(rse);
        }
        prev = Some((ratio, rse));
        parts.push(format!("{n}:{ratio:.4}"));
    }
    ok &= (first - 0.324).abs() < 0.01;
    outcome(ok, parts.join(" "))
}

fn identities() -> Outcome {
    let step = step_identity_check(100, 31).unwrap();
    let rows = byparts_suite(DEFAULT_SAMPLES, 31).unwrap();
    let second: Vec<&BoundReport> = rows.iter().filter(|r| r.theorem_id == "byparts.excess").collect();
    let ok = step.verdict == Verdict::Pass && second.len() == 10 && second.iter().all(|r| r.verdict == Verdict::Pass);
    let worst = second.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max);
    outcome(ok, format!("step worst rel {:.1e}; by-parts triples {}, largest |difference| {worst:.1e}", step.lhs, second.len()))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
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

fn thresholds() -> Outcome {
    let n = 100usize;
    let normal = Normal::standard();
    let mut worst: f64 = 0.0;
    for p in [0.5, 1.0, 5.0, 10.0, 50.0, 99.0] {
        let lap = vec![Marginal::laplace(1.0).unwrap(); n];
        worst = worst.max((tstar_threshold(&lap, p).unwrap().value - (n as f64 / p).ln()).abs());
        let uni = vec![Marginal::uniform(2.0).unwrap(); n];
        worst = worst.max((tstar_threshold(&uni, p).unwrap().value - 2.0 * (1.0 - p / n as f64)).abs());
        let gau = vec![Marginal::gaussian(1.5).unwrap(); n];
        let oracle = 1.5 * normal.inverse_cdf(1.0 - p / (2.0 * n as f64));
        worst = worst.max((tstar_threshold(&gau, p).unwrap().value - oracle).abs());
    }
    let lap = vec![Marginal::laplace(1.0).unwrap(); n];
    let t = t_threshold(&lap, 10.0).unwrap().value;
    let oracle = bisect(|t| n as f64 * (t + 1.0) * (-t).exp() / t - 10.0, 1e-6, 50.0);
    let ok = worst <= 1e-8 && (t - oracle).abs() <= 1e-8 && (t - 2.626).abs() <= 1e-3;
    outcome(ok, format!("closed forms worst {worst:.1e}; t(10) = {t:.6}, bisection oracle {oracle:.6}"))
}

fn upper_bounds(reports: &[BoundReport]) -> Outcome {
    let rows: Vec<&BoundReport> = reports.iter().filter(|r| r.theorem_id == "prop11").collect();
    let bad = rows.iter().filter(|r| r.verdict != Verdict::Pass).count();
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    outcome(!rows.is_empty() && bad == 0, format!("{} rows, {bad} failures, largest lhs/rhs {worst:.3}", rows.len()))
}

fn explicit_lower(reports: &[BoundReport]) -> Outcome {
    let independent = ["iid_", "uniform_cube"];
    let rows: Vec<&BoundReport> = reports
        .iter()
        .filter(|r| r.theorem_id == "thm12" && independent.iter().any(|p| r.model.starts_with(p)))
        .collect();
    let min_margin = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let ok = !rows.is_empty() && rows.iter().all(|r| r.verdict == Verdict::Pass && r.ratio >= 10.0);
    outcome(ok, format!("{} independent-product rows, smallest margin {min_margin:.1}", rows.len()))
}

fn calibrated_windows(reports: &[BoundReport]) -> Outcome {
    let rows: Vec<&BoundReport> =
        reports.iter().filter(|r| CALIBRATED_IDS.contains(&r.theorem_id.as_str()) && r.hypotheses_met).collect();
    let outside = rows.iter().filter(|r| r.verdict != Verdict::Pass).count();
    let chain: Vec<&BoundReport> = reports.iter().filter(|r| r.theorem_id == "thm14.chain").collect();
    let chain_bad = chain.iter().filter(|r| r.verdict != Verdict::Pass).count();
    let ok = !rows.is_empty() && outside == 0 && !chain.is_empty() && chain_bad == 0;
    outcome(ok, format!("{} windowed ratios, {outside} outside; median chain {} rows, {chain_bad} failures", rows.len(), chain.len()))
}

fn lemma_grid_check() -> Outcome {
    let start = Instant::now();
    let rows = lemma_grid(&orderstat_core::marginals::catalog()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let bad = rows.iter().filter(|r| r.verdict == Verdict::Fail).count();
    let ids: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.theorem_id.as_str()).collect();
    let ok = bad == 0 && secs < 5.0 && ids.len() >= 7;
    outcome(ok, format!("{} rows over {} checks, {bad} failures, {secs:.2}s", rows.len(), ids.len()))
}

fn cube_minimum() -> Outcome {
    let a = 3f64.sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [64usize, 1024] {
        let model = VectorModel::uniform_cube(n, a).unwrap();
        let e = estimate_mean(&model, &Statistic::KMin(1), 200_000, 900 + n as u64).unwrap();
        let (m, se) = (e.mean * n as f64, e.stderr * n as f64);
        let exact = a * n as f64 / (n as f64 + 1.0);
        let z = (m - exact) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("n={n}: {m:.4} vs {exact:.4} (z={z:.2})"));
    }
    outcome(ok, parts.join(", "))
}

fn run_cli(args: &[&str], out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_orderstat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stderr(std::process::Stdio::null())
        .status()
        .expect("spawn cli");
    assert!(status.code().is_some());
    std::fs::read(out).unwrap_or_default()
}

fn determinism(in_process: &[u8]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let base = ["verify", "--suite", "all", "--seed", "7"];
    let a = run_cli(&base, &dir.path().join("a.csv"));
    let b = run_cli(&base, &dir.path().join("b.csv"));
    let one = run_cli(&[&base[..], &["--threads", "1"]].concat(), &dir.path().join("t1.csv"));
    let four = run_cli(&[&base[..], &["--threads", "4"]].concat(), &dir.path().join("t4.csv"));
    let ok = !a.is_empty() && a == b && a == one && a == four && a == in_process;
    outcome(
        ok,
        format!(
            "{} bytes; repeat {}, threads 1 {}, threads 4 {}, library {}",
            a.len(),
            a == b,
            a == one,
            a == four,
            a == in_process
        ),
    )
}

fn main() -> ExitCode {
    let cfg = SuiteConfig::new(Suite::All, GridConfig::default_grid(), DEFAULT_SAMPLES, SUITE_SEED);
    let reports = run_suite(&cfg).expect("default suite runs");
    let mut csv = Vec::new();
    write_csv(&mut csv, &reports).unwrap();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("exact top-k sum for the shared-modulus examples", Box::new(exact_examples)),
        ("sign-shared example ratio decreases in n", Box::new(counterexample_trend)),
        ("step-integral and by-parts identities", Box::new(identities)),
        ("threshold closed forms and bisection oracle", Box::new(thresholds)),
        ("upper bound 2k t(k) on the default grid", Box::new(|| upper_bounds(&reports))),
        ("explicit lower constant 1/972 with 10x margin", Box::new(|| explicit_lower(&reports))),
        ("calibrated ratio windows and median chain", Box::new(|| calibrated_windows(&reports))),
        ("analytic lemma grid", Box::new(lemma_grid_check)),
        ("cube minimum closed form", Box::new(cube_minimum)),
        ("byte-identical reports across runs and threads", Box::new(|| determinism(&csv))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {}: {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
