//! Grids of models and the suite runner.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{catalog, Marginal};
use crate::models::{Covariance, ModelConfig, VectorModel};
use crate::montecarlo::{byparts_identity_check, tail_power_check, RunConfig};
use crate::report::{BoundReport, Verdict};
use crate::rng::derive_seed;
use crate::thresholds::{isotropic_asymptotics_check, sandwich_check, AsymptoticsGrid};
use crate::verify::calibration::Calibration;
use crate::verify::checks::{
    isotropic_reports, kmax_reports, logconcave_report, negcorr_report, prop_upper_report, revkmax_reports,
    verify_alpha, weak_strong_reports, CheckOptions, Evidence,
};
use crate::verify::lemmas::lemma_grid;

/// Default number of draws per model.
pub const DEFAULT_SAMPLES: usize = 20_000;

/// Moment orders of the weak/strong comparison in the suite.
pub const WEAK_STRONG_ORDERS: [f64; 3] = [2.0, 4.0, 8.0];

/// A named family of vector models, instantiated per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// i.i.d. standard Gaussian coordinates.
    Gaussian,
    /// i.i.d. Laplace coordinates with unit variance.
    Laplace,
    /// i.i.d. uniform on `[-√3, √3]`.
    Uniform,
    /// Uniform on the cube `[-√3, √3]^n`.
    UniformCube,
    /// `(ε_1 g, ..., ε_n g)`.
    #[serde(rename = "example1", alias = "sign_shared_gaussian")]
    SignShared,
    /// `(g, ..., g)`.
    #[serde(rename = "example2", alias = "fully_correlated_gaussian")]
    FullyCorrelated,
    /// Gaussian with covariance `0.5^|i-j|`.
    GaussianAr,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Gaussian,
        Family::Laplace,
        Family::Uniform,
        Family::UniformCube,
        Family::SignShared,
        Family::FullyCorrelated,
        Family::GaussianAr,
    ];

    pub fn build(self, n: usize) -> Result<VectorModel> {
        let root3 = 3f64.sqrt();
        match self {
            Family::Gaussian => VectorModel::iid(Marginal::gaussian(1.0)?, n),
            Family::Laplace => VectorModel::iid(Marginal::laplace(std::f64::consts::FRAC_1_SQRT_2)?, n),
            Family::Uniform => VectorModel::iid(Marginal::uniform(root3)?, n),
            Family::UniformCube => VectorModel::uniform_cube(n, root3),
            Family::SignShared => VectorModel::sign_shared_gaussian(n),
            Family::FullyCorrelated => VectorModel::fully_correlated_gaussian(n),
            Family::GaussianAr => VectorModel::gaussian(Covariance::autoregressive(n, 0.5, 1.0)?),
        }
    }
}

/// An order `k`, fixed or as a function of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Fixed(usize),
    /// `"sqrt"` (`⌈√n⌉`), `"n"` or `"n/D"`.
    Rule(String),
}

impl KSpec {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let k = match self {
            KSpec::Fixed(k) => *k,
            KSpec::Rule(rule) => match rule.trim() {
                "sqrt" => (n as f64).sqrt().ceil() as usize,
                "n" => n,
                r => {
                    let d = r
                        .strip_prefix("n/")
                        .and_then(|d| d.trim().parse::<usize>().ok())
                        .filter(|d| *d > 0)
                        .ok_or_else(|| Error::Config(format!("unrecognized k rule '{r}'")))?;
                    n / d
                }
            },
        };
        Ok(k.clamp(1, n))
    }
}

/// Families crossed with dimensions, plus explicitly configured models.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub families: Vec<Family>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub k: Vec<KSpec>,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
}

impl GridConfig {
    /// Seven families, `n ∈ {64, 256, 1024}`, `k ∈ {1, 4, ⌈√n⌉, n/4, n/2}`.
    pub fn default_grid() -> Self {
        GridConfig {
            families: Family::ALL.to_vec(),
            n: vec![64, 256, 1024],
            k: vec![
                KSpec::Fixed(1),
                KSpec::Fixed(4),
                KSpec::Rule("sqrt".into()),
                KSpec::Rule("n/4".into()),
                KSpec::Rule("n/2".into()),
            ],
            models: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("grid file: {e}")))
    }

    pub fn is_empty(&self) -> bool {
        (self.families.is_empty() || self.n.is_empty()) && self.models.is_empty()
    }

    pub fn models(&self) -> Result<Vec<VectorModel>> {
        let mut out = Vec::new();
        for &f in &self.families {
            for &n in &self.n {
                if n == 0 {
                    return Err(Error::Config("grid dimension must be positive".into()));
                }
                out.push(f.build(n)?);
            }
        }
        for m in &self.models {
            out.push(m.build()?);
        }
        Ok(out)
    }

    pub fn orders(&self, n: usize) -> Result<Vec<usize>> {
        let mut ks = self.k.iter().map(|k| k.resolve(n)).collect::<Result<Vec<_>>>()?;
        ks.sort_unstable();
        ks.dedup();
        Ok(ks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    TopKUpper,
    NegCorr,
    LogConcave,
    KMax,
    ReversedKMax,
    Isotropic,
    WeakStrong,
    Lemmas,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }

    fn needs_evidence(self) -> bool {
        !matches!(self, Suite::WeakStrong | Suite::Lemmas)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "prop11" => Suite::TopKUpper,
            "thm12" => Suite::NegCorr,
            "thm13" => Suite::LogConcave,
            "thm14" => Suite::KMax,
            "thm15" => Suite::ReversedKMax,
            "cor16" => Suite::Isotropic,
            "weakstrong" => Suite::WeakStrong,
            "lemmas" => Suite::Lemmas,
            _ => return Err(Error::Config(format!("unknown suite '{s}'"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub grid: GridConfig,
    pub options: CheckOptions,
    pub calibration: Calibration,
}

impl SuiteConfig {
    pub fn new(suite: Suite, grid: GridConfig, samples: usize, seed: u64) -> Self {
        SuiteConfig {
            suite,
            grid,
            options: CheckOptions::new(samples, seed),
            calibration: Calibration::frozen(),
        }
    }
}

/// Runs the configured checks. Reports are ordered by
/// `(theorem_id, model, n, k)` and do not depend on the thread count.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    let suite = cfg.suite;
    let opts = &cfg.options;
    let cal = &cfg.calibration;
    if suite.includes(Suite::Lemmas) && !cfg.grid.is_empty() {
        out.extend(lemma_grid(&catalog())?);
    }
    for model in cfg.grid.models()? {
        let n = model.dim();
        let ks = cfg.grid.orders(n)?;
        if suite.needs_evidence() && !ks.is_empty() {
            let ev = Evidence::gather(&model, &ks, opts)?;
            let alpha = if suite.includes(Suite::NegCorr) { Some(verify_alpha(&model, 1.0, opts)?) } else { None };
            for o in &ev.orders {
                if suite.includes(Suite::TopKUpper) {
                    out.push(prop_upper_report(&ev, o));
                }
                if let Some(status) = &alpha {
                    out.push(negcorr_report(&ev, o, 1.0, status));
                }
                if suite.includes(Suite::LogConcave) {
                    out.push(logconcave_report(&ev, o, cal));
                }
                if suite.includes(Suite::KMax) {
                    out.extend(kmax_reports(&ev, o, cal));
                }
                if suite.includes(Suite::ReversedKMax) {
                    out.extend(revkmax_reports(&ev, o, cal));
                }
                if suite.includes(Suite::Isotropic) && 2 * o.k <= n {
                    out.extend(isotropic_reports(&ev, o, cal));
                }
            }
        }
        if suite.includes(Suite::WeakStrong) {
            match weak_strong_reports(&model, None, &WEAK_STRONG_ORDERS, opts, cal) {
                Ok(rows) => out.extend(rows),
                Err(Error::Refused(why)) => {
                    let mut r = BoundReport::new("weakstrong.C", model.label(), n).illustration(format!("refused: {why}"));
                    r.tolerance_policy = "refused".into();
                    out.push(r);
                }
                Err(e) => return Err(e),
            }
        }
        if suite.includes(Suite::Lemmas) && !ks.is_empty() {
            out.extend(model_lemmas(&model, &ks, opts)?);
        }
    }
    sort_reports(&mut out);
    Ok(out)
}

/// Threshold sandwich, isotropic asymptotics, tail powers and the
/// integration-by-parts identities for one model.
fn model_lemmas(model: &VectorModel, ks: &[usize], opts: &CheckOptions) -> Result<Vec<BoundReport>> {
    let n = model.dim();
    let label = model.label();
    let marginals = model.marginals()?;
    let mut out = Vec::new();
    for &k in ks {
        let mut r = sandwich_check(&marginals, k)?;
        r.model = label.clone();
        out.push(r);
    }
    if n >= 4 {
        for mut r in isotropic_asymptotics_check(&marginals, &AsymptoticsGrid::standard(n))? {
            r.model = label.clone();
            out.push(r);
        }
    }
    let seed = derive_seed(opts.seed, &format!("lemmas|{label}|{n}"));
    let cfg = RunConfig::new(opts.count, seed).threads(opts.threads);
    let mid = ks[ks.len() / 2];
    let groups = crate::thresholds::MarginalGroups::new(&marginals)?;
    for k in [ks[0], mid] {
        let t = groups.solve(crate::thresholds::ThresholdKind::TStar, k as f64 - 0.5)?.value;
        if t > 0.0 {
            out.extend(tail_power_check(model, k, &[t], &[1.5, 2.0, 3.0], &cfg)?);
        }
        if k == mid {
            break;
        }
    }
    let t_mid = groups.solve(crate::thresholds::ThresholdKind::T, mid as f64)?.value;
    out.extend(byparts_identity_check(model, mid, t_mid, opts.count, seed)?);
    Ok(out)
}

pub fn sort_reports(reports: &mut [BoundReport]) {
    reports.sort_by(|a, b| {
        a.theorem_id
            .cmp(&b.theorem_id)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.n.cmp(&b.n))
            .then_with(|| a.k.unwrap_or(f64::NAN).total_cmp(&b.k.unwrap_or(f64::NAN)))
    });
}

/// Count of reports per verdict, in `Verdict` order.
pub fn tally(reports: &[BoundReport]) -> [(Verdict, usize); 4] {
    [Verdict::Pass, Verdict::Fail, Verdict::HypothesisNotMet, Verdict::Informational]
        .map(|v| (v, reports.iter().filter(|r| r.verdict == v).count()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_rules() {
        let g = GridConfig::default_grid();
        assert_eq!(g.orders(64).unwrap(), vec![1, 4, 8, 16, 32]);
        assert_eq!(g.orders(1024).unwrap(), vec![1, 4, 32, 256, 512]);
        assert_eq!(g.orders(2).unwrap(), vec![1, 2]);
        assert!(KSpec::Rule("half".into()).resolve(8).is_err());
        assert!(KSpec::Rule("n/0".into()).resolve(8).is_err());
    }

    #[test]
    fn grid_json() {
        let g = GridConfig::from_json(r#"{"families": ["gaussian", "example1"], "n": [8], "k": [1, "sqrt", "n/2"]}"#).unwrap();
        assert_eq!(g.models().unwrap().len(), 2);
        assert_eq!(g.orders(8).unwrap(), vec![1, 3, 4]);
        assert!(GridConfig::from_json(r#"{"families": ["cauchy"]}"#).is_err());
        assert!(GridConfig::from_json(r#"{"famlies": []}"#).is_err());
        let g = GridConfig::from_json(r#"{"models": [{"n": 3, "kind": "example2"}], "k": [2]}"#).unwrap();
        assert_eq!(g.models().unwrap()[0].dim(), 3);
    }

    #[test]
    fn empty_grid_is_empty_report() {
        let cfg = SuiteConfig::new(Suite::All, GridConfig::default(), 2000, 1);
        assert!(run_suite(&cfg).unwrap().is_empty());
    }

    #[test]
    fn small_grid_runs_without_failures() {
        let grid = GridConfig::from_json(
            r#"{"families": ["gaussian", "uniform_cube", "example1", "example2", "gaussian_ar"], "n": [16], "k": [1, 4, "n/2"]}"#,
        )
        .unwrap();
        let cfg = SuiteConfig::new(Suite::All, grid, 4000, 3);
        let reports = run_suite(&cfg).unwrap();
        let failed: Vec<_> = reports.iter().filter(|r| r.failed()).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        let ids: std::collections::BTreeSet<_> = reports.iter().map(|r| r.theorem_id.as_str()).collect();
        for id in ["prop11", "thm12", "thm13.ratio", "thm14.chain", "thm15.multiplier", "cor16.kmin", "weakstrong.C", "lem62", "lem65", "byparts.excess"] {
            assert!(ids.contains(id), "missing {id}");
        }
        let again = run_suite(&cfg).unwrap();
        let csv = |rs: &[BoundReport]| {
            let mut buf = Vec::new();
            crate::report::write_csv(&mut buf, rs).unwrap();
            buf
        };
        assert_eq!(csv(&reports), csv(&again));
    }
}
