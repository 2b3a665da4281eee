//! Joint laws of `X = (X_1, ..., X_n)` and their samplers.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::marginals::Marginal;
use crate::rng;

/// Symmetry tolerance and eigenvalue clipping threshold for covariances.
pub const COVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    /// Packed lower-triangular Cholesky factor, row `i` holding `i + 1` entries.
    Cholesky(Vec<f64>),
    /// Dense row-major `F` with `F F^T = Σ`, from a clipped eigendecomposition.
    Dense(Vec<f64>),
    /// `X_0 = s g_0`, `X_i = rho X_{i-1} + s sqrt(1 - rho^2) g_i`.
    Autoregressive { rho: f64, sd: f64 },
}

/// Gaussian covariance together with a symmetric factorization of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    n: usize,
    matrix: Vec<f64>,
    factor: Factor,
}

impl Covariance {
    /// Factor a row-major `n x n` covariance. Cholesky is tried first; a
    /// rank-deficient matrix falls back to an eigendecomposition with
    /// eigenvalues in `[-1e-10, 0)` clipped to zero.
    pub fn new(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if n == 0 || matrix.len() != n * n {
            return Err(Error::Model(format!("covariance must be {n}x{n}, got {} entries", matrix.len())));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("covariance has non-finite entries".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (matrix[i * n + j] - matrix[j * n + i]).abs() > COVARIANCE_TOL {
                    return Err(Error::Model(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        let m = DMatrix::from_row_slice(n, n, &matrix);
        let factor = if let Some(chol) = m.clone().cholesky() {
            let l = chol.l();
            let mut packed = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in 0..=i {
                    packed.push(l[(i, j)]);
                }
            }
            Factor::Cholesky(packed)
        } else {
            let eig = SymmetricEigen::new(m);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -COVARIANCE_TOL {
                return Err(Error::Model(format!("covariance is not positive semidefinite (eigenvalue {min:e})")));
            }
            let mut dense = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    dense[i * n + j] = eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt();
                }
            }
            Factor::Dense(dense)
        };
        Ok(Covariance { n, matrix, factor })
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            m[i * n + i] = *d;
        }
        Self::new(n, m)
    }

    /// Autoregressive covariance `variance * rho^|i-j|`.
    pub fn autoregressive(n: usize, rho: f64, variance: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::Model(format!("AR coefficient must lie in (-1, 1), got {rho}")));
        }
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = variance * rho.powi((i as i32 - j as i32).abs());
            }
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::Model(format!("AR variance must be positive, got {variance}")));
        }
        if n == 0 {
            return Err(Error::Model("covariance must be at least 1x1".into()));
        }
        Ok(Covariance { n, matrix: m, factor: Factor::Autoregressive { rho, sd: variance.sqrt() } })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j) == 0.0))
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        match &self.factor {
            Factor::Cholesky(packed) => {
                let mut offset = 0;
                for (i, x) in out.iter_mut().enumerate() {
                    let row = &packed[offset..offset + i + 1];
                    *x = dot(row, &z[..=i]);
                    offset += i + 1;
                }
            }
            Factor::Dense(f) => {
                for (i, x) in out.iter_mut().enumerate() {
                    *x = dot(&f[i * self.n..(i + 1) * self.n], z);
                }
            }
            Factor::Autoregressive { rho, sd } => {
                let innovation = sd * (1.0 - rho * rho).sqrt();
                let mut prev = sd * z[0];
                out[0] = prev;
                for (x, g) in out[1..].iter_mut().zip(&z[1..]) {
                    prev = rho * prev + innovation * g;
                    *x = prev;
                }
            }
        }
    }
}

// Four independent accumulators; the O(n^2) factor product dominates
// Gaussian sampling.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (a4, ar) = a.split_at(a.len() - a.len() % 4);
    let (b4, br) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The dependence structure of a [`VectorModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    IndependentProduct(Vec<Marginal>),
    GaussianCovariance(Covariance),
    /// `(ε_1 g, ..., ε_n g)` with independent signs and one shared normal.
    SignSharedGaussian,
    /// `(g, ..., g)`.
    FullyCorrelatedGaussian,
    /// Uniform on `[-a, a]^n`.
    UniformCube { halfwidth: f64 },
    /// Independent coordinates carrying the marginals of `base`.
    Decoupled { base: Box<VectorModel>, marginals: Vec<Marginal> },
}

/// Structural properties of a model that the bound checks gate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hypotheses {
    pub log_concave: bool,
    pub independent: bool,
    pub uncorrelated: bool,
    pub unconditional: bool,
    /// `X` and `-X` have the same law.
    pub symmetric: bool,
    pub mean_zero: bool,
    pub isotropic: bool,
}

/// A joint law of `X = (X_1, ..., X_n)`, optionally with coordinate weights
/// (the law of `(a_1 X_1, ..., a_n X_n)`).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorModel {
    n: usize,
    kind: ModelKind,
    weights: Option<Vec<f64>>,
}

impl VectorModel {
    pub fn new(n: usize, kind: ModelKind, weights: Option<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Model("dimension must be at least 1".into()));
        }
        match &kind {
            ModelKind::IndependentProduct(ms) => {
                if ms.len() != n {
                    return Err(Error::Model(format!("{} marginals supplied for dimension {n}", ms.len())));
                }
                for m in ms {
                    m.validate()?;
                }
            }
            ModelKind::GaussianCovariance(c) => {
                if c.n != n {
                    return Err(Error::Model(format!("covariance is {}x{0}, dimension is {n}", c.n)));
                }
            }
            ModelKind::UniformCube { halfwidth } => {
                if !(halfwidth.is_finite() && *halfwidth > 0.0) {
                    return Err(Error::Model(format!("halfwidth must be positive, got {halfwidth}")));
                }
            }
            ModelKind::Decoupled { base, marginals } => {
                if base.n != n || marginals.len() != n {
                    return Err(Error::Model("decoupled model dimension mismatch".into()));
                }
            }
            ModelKind::SignSharedGaussian | ModelKind::FullyCorrelatedGaussian => {}
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::Model(format!("{} weights supplied for dimension {n}", w.len())));
            }
            if w.iter().any(|a| !a.is_finite()) {
                return Err(Error::Model("weights must be finite".into()));
            }
        }
        Ok(VectorModel { n, kind, weights })
    }

    pub fn iid(marginal: Marginal, n: usize) -> Result<Self> {
        Self::new(n, ModelKind::IndependentProduct(vec![marginal; n]), None)
    }

    pub fn independent(marginals: Vec<Marginal>) -> Result<Self> {
        Self::new(marginals.len(), ModelKind::IndependentProduct(marginals), None)
    }

    pub fn gaussian(cov: Covariance) -> Result<Self> {
        Self::new(cov.n, ModelKind::GaussianCovariance(cov), None)
    }

    /// `(ε_1 g, ..., ε_n g)`: isotropic, with every modulus equal to `|g|`.
    pub fn sign_shared_gaussian(n: usize) -> Result<Self> {
        Self::new(n, ModelKind::SignSharedGaussian, None)
    }

    /// `(g, ..., g)`.
    pub fn fully_correlated_gaussian(n: usize) -> Result<Self> {
        Self::new(n, ModelKind::FullyCorrelatedGaussian, None)
    }

    pub fn uniform_cube(n: usize, halfwidth: f64) -> Result<Self> {
        Self::new(n, ModelKind::UniformCube { halfwidth }, None)
    }

    /// Independent coordinates with the same marginals as `base`.
    pub fn decoupled(base: VectorModel) -> Result<Self> {
        let marginals = base.marginals()?;
        Self::new(base.n, ModelKind::Decoupled { base: Box::new(base.clone()), marginals }, None)
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.kind, Some(weights))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Exact law of coordinate `i`.
    pub fn marginal_of(&self, i: usize) -> Result<Marginal> {
        if i >= self.n {
            return domain(format!("coordinate {i} out of range for dimension {}", self.n));
        }
        let unweighted = match &self.kind {
            ModelKind::IndependentProduct(ms) => ms[i].clone(),
            ModelKind::GaussianCovariance(c) => {
                let var = c.get(i, i);
                if var <= 0.0 {
                    Marginal::point_mass()
                } else {
                    Marginal::Gaussian { sigma: var.sqrt() }
                }
            }
            ModelKind::SignSharedGaussian | ModelKind::FullyCorrelatedGaussian => Marginal::Gaussian { sigma: 1.0 },
            ModelKind::UniformCube { halfwidth } => Marginal::Uniform { halfwidth: *halfwidth },
            ModelKind::Decoupled { marginals, .. } => marginals[i].clone(),
        };
        Marginal::scaled(unweighted, self.weight(i))
    }

    /// All coordinate marginals.
    pub fn marginals(&self) -> Result<Vec<Marginal>> {
        (0..self.n).map(|i| self.marginal_of(i)).collect()
    }

    fn variances(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.marginal_of(i).map(|m| m.variance()).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn hypotheses(&self) -> Hypotheses {
        let marginals = self.marginals().unwrap_or_default();
        let all_symmetric = marginals.iter().all(Marginal::is_symmetric);
        let all_mean_zero = marginals.iter().all(Marginal::is_mean_zero);
        let single = self.n == 1;
        let (log_concave, independent, uncorrelated, unconditional, symmetric) = match &self.kind {
            ModelKind::IndependentProduct(_) | ModelKind::Decoupled { .. } => {
                (true, true, true, all_symmetric, all_symmetric)
            }
            ModelKind::GaussianCovariance(c) => {
                let diag = c.is_diagonal();
                (true, diag, diag, diag, true)
            }
            // The support is a union of lines, so only the marginals are log-concave.
            ModelKind::SignSharedGaussian => (single, single, true, true, true),
            ModelKind::FullyCorrelatedGaussian => (true, single, single, single, true),
            ModelKind::UniformCube { .. } => (true, true, true, true, true),
        };
        let isotropic = all_mean_zero
            && uncorrelated
            && self.variances().iter().all(|v| (v - 1.0).abs() <= 1e-12);
        Hypotheses {
            log_concave,
            independent,
            uncorrelated,
            unconditional,
            symmetric,
            mean_zero: all_mean_zero,
            isotropic,
        }
    }

    /// Short descriptor for reports.
    pub fn label(&self) -> String {
        let base = match &self.kind {
            ModelKind::IndependentProduct(ms) => {
                if ms.iter().all(|m| m == &ms[0]) {
                    format!("iid_{}", ms[0].label())
                } else {
                    "independent_product".to_string()
                }
            }
            ModelKind::GaussianCovariance(c) => {
                if c.is_diagonal() {
                    "gaussian_diag".to_string()
                } else if c.n > 1 && is_autoregressive(c) {
                    format!("gaussian_ar({})", c.get(0, 1) / c.get(0, 0))
                } else {
                    "gaussian_covariance".to_string()
                }
            }
            ModelKind::SignSharedGaussian => "example1".to_string(),
            ModelKind::FullyCorrelatedGaussian => "example2".to_string(),
            ModelKind::UniformCube { halfwidth } => format!("uniform_cube({halfwidth})"),
            ModelKind::Decoupled { base, .. } => format!("decoupled({})", base.label()),
        };
        if self.weights.is_some() {
            format!("weighted_{base}")
        } else {
            base
        }
    }

    /// Per-worker sampler holding scratch space.
    pub fn sampler(&self) -> Sampler<'_> {
        let scratch = match &self.kind {
            ModelKind::GaussianCovariance(_) => vec![0.0; self.n],
            _ => Vec::new(),
        };
        Sampler { model: self, scratch }
    }

    /// `count` draws from chunks `0..` of stream `(seed, stream_id)`.
    ///
    /// Row `j` is the same draw the Monte Carlo estimators see as draw `j`
    /// of that stream.
    pub fn sample(&self, count: usize, seed: u64, stream_id: u64) -> Result<SampleBatch> {
        if count == 0 {
            return domain("sample count must be at least 1");
        }
        let mut data = vec![0.0; count * self.n];
        let mut sampler = self.sampler();
        let mut rows = data.chunks_exact_mut(self.n);
        for (chunk, draws) in rng::chunks(count) {
            let mut r = rng::chunk_rng(seed, stream_id, chunk);
            for _ in 0..draws {
                sampler.draw(&mut r, rows.next().expect("row count matches"));
            }
        }
        Ok(SampleBatch { n: self.n, count, seed, stream_id, data })
    }
}

fn is_autoregressive(c: &Covariance) -> bool {
    let v = c.get(0, 0);
    let rho = c.get(0, 1) / v;
    (0..c.n).all(|i| {
        (0..c.n).all(|j| (c.get(i, j) - v * rho.powi((i as i32 - j as i32).abs())).abs() <= 1e-12 * v)
    })
}

/// Draws one vector at a time into a caller-provided buffer.
pub struct Sampler<'a> {
    model: &'a VectorModel,
    scratch: Vec<f64>,
}

impl Sampler<'_> {
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let m = self.model;
        debug_assert_eq!(out.len(), m.n);
        match &m.kind {
            ModelKind::IndependentProduct(ms) => {
                for (x, marginal) in out.iter_mut().zip(ms) {
                    *x = marginal.sample(rng);
                }
            }
            ModelKind::GaussianCovariance(c) => {
                for z in self.scratch.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                c.apply(&self.scratch, out);
            }
            ModelKind::SignSharedGaussian => {
                let g: f64 = rng.sample(StandardNormal);
                for block in out.chunks_mut(64) {
                    let mut signs: u64 = rng.random();
                    for x in block {
                        *x = if signs & 1 == 1 { g } else { -g };
                        signs >>= 1;
                    }
                }
            }
            ModelKind::FullyCorrelatedGaussian => {
                let g: f64 = rng.sample(StandardNormal);
                out.fill(g);
            }
            ModelKind::UniformCube { halfwidth } => {
                for x in out.iter_mut() {
                    *x = halfwidth * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            ModelKind::Decoupled { marginals, .. } => {
                for (x, marginal) in out.iter_mut().zip(marginals) {
                    *x = marginal.sample(rng);
                }
            }
        }
        if let Some(w) = &m.weights {
            for (x, a) in out.iter_mut().zip(w) {
                *x *= a;
            }
        }
    }
}

/// Row-major matrix of independent draws of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub data: Vec<f64>,
}

impl SampleBatch {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.count as f64);
        mean
    }

    /// Sample covariance (divisor `count - 1`), row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.n;
        let mean = self.mean();
        let mut cov = vec![0.0; n * n];
        for r in self.rows() {
            for i in 0..n {
                let di = r[i] - mean[i];
                for j in 0..=i {
                    cov[i * n + j] += di * (r[j] - mean[j]);
                }
            }
        }
        let d = (self.count.max(2) - 1) as f64;
        for i in 0..n {
            for j in 0..=i {
                cov[i * n + j] /= d;
                cov[j * n + i] = cov[i * n + j];
            }
        }
        cov
    }
}

// ---------------------------------------------------------------------------
// Condition (1.2) estimation

/// Empirical estimate of the smallest `α` with
/// `P(|X_i| >= s, |X_j| >= t) <= α P(|X_i| >= s) P(|X_j| >= t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Delta-method standard error of the maximizing cell.
    pub stderr: f64,
    /// `(i, j, s, t)` of the maximizing cell.
    pub argmax: (usize, usize, f64, f64),
    pub cells_used: usize,
    pub cells_skipped: usize,
}

/// Coordinates probed by [`estimate_negcorr_alpha`]: all of them for
/// `n <= 8`, otherwise eight evenly spread ones.
fn probe_coordinates(n: usize) -> Vec<usize> {
    if n <= 8 {
        (0..n).collect()
    } else {
        let mut c: Vec<usize> = (0..8).map(|m| m * (n - 1) / 7).collect();
        c.dedup();
        c
    }
}

/// Maximum empirical joint-tail ratio over coordinate pairs and grid cells.
///
/// Cells where either empirical marginal survival falls below
/// `10 / sqrt(count)` are skipped.
pub fn estimate_negcorr_alpha(model: &VectorModel, grid: &[f64], count: usize, seed: u64) -> Result<AlphaEstimate> {
    if model.n < 2 {
        return Err(Error::Estimation("condition needs at least two coordinates".into()));
    }
    if grid.is_empty() || grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return domain("threshold grid must be nonempty and positive");
    }
    let coords = probe_coordinates(model.n);
    let g = grid.len();
    let c = coords.len();
    let mut single = vec![0u64; c * g];
    let mut joint = vec![0u64; c * c * g * g];
    let mut hit = vec![false; c * g];
    let mut row = vec![0.0; model.n];
    let mut sampler = model.sampler();
    for (chunk, draws) in rng::chunks(count) {
        let mut r = rng::chunk_rng(seed, 0, chunk);
        for _ in 0..draws {
            sampler.draw(&mut r, &mut row);
            for (a, &i) in coords.iter().enumerate() {
                let x = row[i].abs();
                for (b, &s) in grid.iter().enumerate() {
                    let h = x >= s;
                    hit[a * g + b] = h;
                    single[a * g + b] += u64::from(h);
                }
            }
            for a in 0..c {
                for b in (a + 1)..c {
                    for u in 0..g {
                        if !hit[a * g + u] {
                            continue;
                        }
                        for v in 0..g {
                            if hit[b * g + v] {
                                joint[((a * c + b) * g + u) * g + v] += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let nf = count as f64;
    let floor = 10.0 / nf.sqrt();
    let mut best: Option<AlphaEstimate> = None;
    let (mut used, mut skipped) = (0, 0);
    for a in 0..c {
        for b in (a + 1)..c {
            for u in 0..g {
                for v in 0..g {
                    let pi = single[a * g + u] as f64 / nf;
                    let pj = single[b * g + v] as f64 / nf;
                    if pi < floor || pj < floor {
                        skipped += 1;
                        continue;
                    }
                    used += 1;
                    let pij = joint[((a * c + b) * g + u) * g + v] as f64 / nf;
                    let ratio = pij / (pi * pj);
                    let rel = ((1.0 - pij) / (nf * pij.max(1.0 / nf))
                        + (1.0 - pi) / (nf * pi)
                        + (1.0 - pj) / (nf * pj))
                        .sqrt();
                    if best.as_ref().is_none_or(|e| ratio > e.alpha) {
                        best = Some(AlphaEstimate {
                            alpha: ratio,
                            stderr: ratio.max(1.0) * rel,
                            argmax: (coords[a], coords[b], grid[u], grid[v]),
                            cells_used: 0,
                            cells_skipped: 0,
                        });
                    }
                }
            }
        }
    }
    match best {
        Some(e) => Ok(AlphaEstimate { cells_used: used, cells_skipped: skipped, ..e }),
        None => Err(Error::Estimation(format!(
            "all {skipped} grid cells skipped: marginal survivals below 10/sqrt({count})"
        ))),
    }
}

// ---------------------------------------------------------------------------
// JSON configuration

/// Covariance as supplied in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceSpec {
    Nested { covariance: Vec<Vec<f64>> },
    RowMajor { covariance: Vec<f64> },
    Diag { diag: Vec<f64> },
    Autoregressive { ar: f64, #[serde(default = "unit")] variance: f64 },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentSpec {
    #[serde(default)]
    pub marginal: Option<Marginal>,
    #[serde(default)]
    pub marginals: Option<Vec<Marginal>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    #[serde(default = "sqrt3")]
    pub halfwidth: f64,
}

fn sqrt3() -> f64 {
    3f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoupledSpec {
    pub base: Box<ModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum KindConfig {
    #[serde(alias = "iid")]
    IndependentProduct(IndependentSpec),
    GaussianCovariance(CovarianceSpec),
    #[serde(alias = "example1")]
    SignSharedGaussian,
    #[serde(alias = "example2")]
    FullyCorrelatedGaussian,
    UniformCube(CubeSpec),
    Decoupled(DecoupledSpec),
}

/// Model file: `{"kind": "...", "n": ..., "params": ..., "weights": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(flatten)]
    pub kind: KindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid model JSON: {e}")))
    }

    pub fn build(&self) -> Result<VectorModel> {
        let n = self.n;
        let model = match &self.kind {
            KindConfig::IndependentProduct(spec) => match (&spec.marginal, &spec.marginals) {
                (Some(m), None) => VectorModel::iid(m.clone(), n)?,
                (None, Some(ms)) => VectorModel::new(n, ModelKind::IndependentProduct(ms.clone()), None)?,
                _ => return Err(Error::Config("independent_product needs exactly one of marginal, marginals".into())),
            },
            KindConfig::GaussianCovariance(spec) => {
                let cov = match spec {
                    CovarianceSpec::Nested { covariance } => {
                        if covariance.len() != n || covariance.iter().any(|r| r.len() != n) {
                            return Err(Error::Config(format!("covariance must be {n}x{n}")));
                        }
                        Covariance::new(n, covariance.concat())?
                    }
                    CovarianceSpec::RowMajor { covariance } => Covariance::new(n, covariance.clone())?,
                    CovarianceSpec::Diag { diag } => {
                        if diag.len() != n {
                            return Err(Error::Config(format!("diag must have {n} entries")));
                        }
                        Covariance::from_diag(diag)?
                    }
                    CovarianceSpec::Autoregressive { ar, variance } => Covariance::autoregressive(n, *ar, *variance)?,
                };
                VectorModel::gaussian(cov)?
            }
            KindConfig::SignSharedGaussian => VectorModel::sign_shared_gaussian(n)?,
            KindConfig::FullyCorrelatedGaussian => VectorModel::fully_correlated_gaussian(n)?,
            KindConfig::UniformCube(spec) => VectorModel::uniform_cube(n, spec.halfwidth)?,
            KindConfig::Decoupled(spec) => {
                if spec.base.n != n {
                    return Err(Error::Config("decoupled base dimension differs".into()));
                }
                VectorModel::decoupled(spec.base.build()?)?
            }
        };
        match &self.weights {
            Some(w) => model.with_weights(w.clone()),
            None => Ok(model),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example2_coordinates_are_equal() {
        let m = VectorModel::fully_correlated_gaussian(5).unwrap();
        let b = m.sample(100, 1, 0).unwrap();
        for r in b.rows() {
            assert!(r.iter().all(|x| *x == r[0]));
        }
    }

    #[test]
    fn example1_moduli_are_equal_and_signs_vary() {
        let m = VectorModel::sign_shared_gaussian(130).unwrap();
        let b = m.sample(50, 1, 0).unwrap();
        let mut negatives = 0;
        for r in b.rows() {
            assert!(r.iter().all(|x| x.abs() == r[0].abs()));
            negatives += r.iter().filter(|x| x.is_sign_negative()).count();
        }
        let frac = negatives as f64 / (50.0 * 130.0);
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = VectorModel::iid(Marginal::laplace(1.0).unwrap(), 7).unwrap();
        assert_eq!(m.sample(3000, 11, 2).unwrap(), m.sample(3000, 11, 2).unwrap());
        assert_ne!(m.sample(10, 11, 2).unwrap().data, m.sample(10, 11, 3).unwrap().data);
    }

    #[test]
    fn marginal_examples() {
        let e1 = VectorModel::sign_shared_gaussian(4).unwrap();
        assert_eq!(e1.marginal_of(2).unwrap(), Marginal::Gaussian { sigma: 1.0 });
        let cube = VectorModel::uniform_cube(3, 2.0).unwrap();
        assert_eq!(cube.marginal_of(0).unwrap(), Marginal::Uniform { halfwidth: 2.0 });
        let g = VectorModel::gaussian(Covariance::from_diag(&[4.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g.marginal_of(0).unwrap(), Marginal::Gaussian { sigma: 2.0 });
        assert!(g.marginal_of(2).is_err());
    }

    #[test]
    fn weighted_marginal_is_scaled_copy() {
        let m = VectorModel::uniform_cube(2, 1.0).unwrap().with_weights(vec![0.0, -2.0]).unwrap();
        assert!(m.marginal_of(0).unwrap().is_degenerate());
        let m1 = m.marginal_of(1).unwrap();
        assert!((m1.variance() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let err = Covariance::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Model(_)));
        assert!(Covariance::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn rank_one_covariance_is_accepted() {
        let c = Covariance::new(3, vec![1.0; 9]).unwrap();
        assert!(matches!(c.factor, Factor::Dense(_)));
        let m = VectorModel::gaussian(c).unwrap();
        let b = m.sample(20, 3, 0).unwrap();
        for r in b.rows() {
            assert!((r[0] - r[1]).abs() < 1e-7 && (r[1] - r[2]).abs() < 1e-7);
        }
    }

    #[test]
    fn independent_gaussian_pair_is_uncorrelated() {
        let m = VectorModel::iid(Marginal::gaussian(1.0).unwrap(), 2).unwrap();
        let b = m.sample(1_000_000, 5, 0).unwrap();
        let c = b.covariance();
        let corr = c[1] / (c[0] * c[3]).sqrt();
        assert!(corr.abs() < 0.005, "{corr}");
    }

    #[test]
    fn factors_reproduce_covariance() {
        let ar = Covariance::autoregressive(6, 0.5, 2.0).unwrap();
        let dense = Covariance::new(6, (0..36).map(|e| ar.get(e / 6, e % 6)).collect()).unwrap();
        assert!(matches!(dense.factor, Factor::Cholesky(_)));
        for c in [ar, dense] {
            let m = VectorModel::gaussian(c.clone()).unwrap();
            let b = m.sample(200_000, 9, 0).unwrap();
            let s = b.covariance();
            for i in 0..6 {
                for j in 0..6 {
                    assert!((s[i * 6 + j] - c.get(i, j)).abs() < 12.0 / (200_000f64).sqrt() * 1.5, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn hypotheses_flags() {
        let h = VectorModel::uniform_cube(4, 3f64.sqrt()).unwrap().hypotheses();
        assert!(h.isotropic && h.unconditional && h.log_concave && h.uncorrelated);
        let h = VectorModel::sign_shared_gaussian(4).unwrap().hypotheses();
        assert!(h.isotropic && h.uncorrelated && h.unconditional && !h.log_concave && !h.independent);
        let h = VectorModel::fully_correlated_gaussian(4).unwrap().hypotheses();
        assert!(!h.uncorrelated && !h.isotropic && h.log_concave);
        let h = VectorModel::iid(Marginal::laplace(1.0).unwrap(), 3).unwrap().hypotheses();
        assert!(!h.isotropic && h.independent && h.unconditional);
        let h = VectorModel::iid(Marginal::shifted_exponential(1.0, true).unwrap(), 3).unwrap().hypotheses();
        assert!(h.isotropic && !h.unconditional && !h.symmetric);
        let h = VectorModel::gaussian(Covariance::autoregressive(4, 0.5, 1.0).unwrap()).unwrap().hypotheses();
        assert!(!h.uncorrelated && h.log_concave && !h.isotropic);
    }

    #[test]
    fn negcorr_alpha_for_correlated_models() {
        // P(|g| >= t) = 0.1 at t = 1.6448536...
        let t = 1.644_853_626_951_472_7;
        for m in [VectorModel::fully_correlated_gaussian(3).unwrap(), VectorModel::sign_shared_gaussian(3).unwrap()] {
            let a = estimate_negcorr_alpha(&m, &[t], 200_000, 4).unwrap();
            assert!((a.alpha - 10.0).abs() < 3.0 * a.stderr + 0.05, "{a:?}");
        }
    }

    #[test]
    fn negcorr_alpha_for_independent_model() {
        let m = VectorModel::iid(Marginal::gaussian(1.0).unwrap(), 2).unwrap();
        let a = estimate_negcorr_alpha(&m, &[1.0], 400_000, 4).unwrap();
        assert!((a.alpha - 1.0).abs() < 3.0 * a.stderr, "{a:?}");
    }

    #[test]
    fn negcorr_alpha_all_cells_skipped() {
        let m = VectorModel::iid(Marginal::gaussian(1.0).unwrap(), 2).unwrap();
        assert!(matches!(estimate_negcorr_alpha(&m, &[50.0], 1000, 1), Err(Error::Estimation(_))));
    }

    #[test]
    fn config_round_trip_and_aliases() {
        let cfg = ModelConfig::from_json(
            r#"{"kind": "iid", "n": 3, "params": {"marginal": {"family": "laplace", "params": {"scale": 1.0}}}}"#,
        )
        .unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.marginal_of(1).unwrap(), Marginal::Laplace { scale: 1.0 });
        let cfg = ModelConfig::from_json(r#"{"kind": "example1", "n": 16}"#).unwrap();
        assert_eq!(cfg.build().unwrap().label(), "example1");
        let cfg = ModelConfig::from_json(r#"{"kind": "gaussian_covariance", "n": 2, "params": {"diag": [4, 1]}}"#).unwrap();
        assert_eq!(cfg.build().unwrap().marginal_of(0).unwrap(), Marginal::Gaussian { sigma: 2.0 });
        let cfg =
            ModelConfig::from_json(r#"{"kind": "gaussian_covariance", "n": 2, "params": {"covariance": [1, 0.5, 0.5, 1]}}"#)
                .unwrap();
        assert!(cfg.build().is_ok());
        let cfg = ModelConfig::from_json(
            r#"{"kind": "gaussian_covariance", "n": 2, "params": {"covariance": [[1, 0.5], [0.5, 1]]}, "weights": [1, 2]}"#,
        )
        .unwrap();
        assert_eq!(cfg.build().unwrap().marginal_of(1).unwrap().variance(), 4.0);
        let cfg = ModelConfig::from_json(r#"{"kind": "gaussian_covariance", "n": 8, "params": {"ar": 0.5}}"#).unwrap();
        assert_eq!(cfg.build().unwrap().label(), "gaussian_ar(0.5)");
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ModelConfig::from_json(&text).unwrap(), cfg);
        assert!(ModelConfig::from_json(r#"{"kind": "nonsense", "n": 2}"#).is_err());
    }
}
