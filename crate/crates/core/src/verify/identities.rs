//! Exact and Monte Carlo checks of the layer-cake identities.

use rand::Rng;

use crate::error::Result;
use crate::marginals::Marginal;
use crate::models::{Covariance, VectorModel};
use crate::montecarlo::{byparts_identity_check, step_integral_topk};
use crate::report::{BoundReport, Verdict};
use crate::rng::{chunk_rng, derive_seed};
use crate::thresholds::{t_threshold, tstar_threshold};

/// Largest dimension of the exact step-integral check.
pub const MAX_EXACT_DIM: usize = 12;

/// Tolerance of the exact step-integral check.
pub const EXACT_TOL: f64 = 1e-9;

/// `max_{|I|=k} Σ_{i∈I} |x_i|` by enumerating every index set.
pub fn topk_by_subsets(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    assert!(n <= 20 && (1..=n).contains(&k));
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| x[i].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Step integral of `min{k, N(s)}` against subset enumeration on `vectors`
/// random vectors of dimension at most 12. Entries mix continuous values,
/// repeated values and zeros.
pub fn step_identity_check(vectors: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = chunk_rng(seed, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..vectors {
        let n = rng.random_range(1..=MAX_EXACT_DIM);
        let k = rng.random_range(1..=n);
        let x: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..6) {
                0 => 0.0,
                1 => 1.5,
                2 => -1.5,
                _ => rng.random_range(-10.0..10.0),
            })
            .collect();
        let oracle = topk_by_subsets(&x, k);
        let step = step_integral_topk(&x, k)?;
        worst = worst.max((step - oracle).abs() / oracle.max(1.0));
    }
    let mut r = BoundReport::new("lem21.step_integral", format!("{vectors} random vectors"), MAX_EXACT_DIM).with_seed(seed);
    r.lhs = worst;
    r.rhs = EXACT_TOL;
    r.ratio = worst / EXACT_TOL;
    r.verdict = Verdict::from_bool(worst <= EXACT_TOL);
    r.tolerance_policy = "exact, rel 1e-9 against subset enumeration".into();
    Ok(r)
}

enum Level {
    T(f64),
    TStar(f64),
    Fixed(f64),
}

/// Ten model / `k` / `t` triples for the by-parts identities.
fn triples() -> Result<Vec<(VectorModel, usize, Level)>> {
    let root3 = 3f64.sqrt();
    Ok(vec![
        (VectorModel::iid(Marginal::gaussian(1.0)?, 16)?, 4, Level::T(4.0)),
        (VectorModel::iid(Marginal::laplace(1.0)?, 32)?, 8, Level::TStar(7.5)),
        (VectorModel::iid(Marginal::uniform(root3)?, 8)?, 2, Level::Fixed(1.0)),
        (VectorModel::uniform_cube(16, root3)?, 4, Level::T(4.0)),
        (VectorModel::sign_shared_gaussian(64)?, 16, Level::T(16.0)),
        (VectorModel::fully_correlated_gaussian(16)?, 5, Level::Fixed(0.5)),
        (VectorModel::gaussian(Covariance::autoregressive(32, 0.5, 1.0)?)?, 4, Level::TStar(3.5)),
        (VectorModel::iid(Marginal::shifted_exponential(1.0, true)?, 24)?, 6, Level::Fixed(1.2)),
        (VectorModel::iid(Marginal::half_normal_modulus(2.0)?, 10)?, 3, Level::T(3.0)),
        (VectorModel::decoupled(VectorModel::gaussian(Covariance::autoregressive(20, 0.8, 1.0)?)?)?, 5, Level::Fixed(1.0)),
    ])
}

/// By-parts identities on ten model / `k` / `t` triples.
pub fn byparts_suite(count: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for (j, (model, k, level)) in triples()?.into_iter().enumerate() {
        let t = match level {
            Level::T(k) => t_threshold(&model.marginals()?, k)?.value,
            Level::TStar(p) => tstar_threshold(&model.marginals()?, p)?.value,
            Level::Fixed(t) => t,
        };
        out.extend(byparts_identity_check(&model, k, t, count, derive_seed(seed, &format!("byparts|{j}")))?);
    }
    Ok(out)
}
