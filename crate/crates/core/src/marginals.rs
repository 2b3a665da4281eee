//! One-dimensional log-concave laws and the scalar functionals the
//! thresholds and lemma checks are built from.
//!
//! Every family has closed forms for the modulus survival function and the
//! truncated absolute mean. The quadrature routes (`*_by_quadrature`) are
//! kept alongside as an independent oracle and as the fallback for moments
//! without a closed form.

use std::f64::consts::{E, PI, SQRT_2};

use libm::erfc;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::quadrature;

/// Relative tolerance used whenever a marginal functional needs quadrature.
pub const QUAD_REL_TOL: f64 = 1e-12;

/// Widths (in units of the family's standard deviation) of the integration
/// window past the truncation point; the neglected tail is below 1e-14 for
/// every catalog family.
const TAIL_WINDOW: f64 = 40.0;

/// A one-dimensional distribution from the catalog.
///
/// Serialized as `{"family": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Marginal {
    /// Centered normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Symmetric two-sided exponential with density `exp(-|x|/scale) / (2 scale)`.
    #[serde(alias = "two_sided_exponential")]
    Laplace { scale: f64 },
    /// Uniform on `[-halfwidth, halfwidth]`.
    Uniform { halfwidth: f64 },
    /// Law of `sigma * |g|` for standard normal `g`.
    HalfNormalModulus { sigma: f64 },
    /// `E / rate`, shifted by its mean when `centered`.
    ShiftedExponential {
        rate: f64,
        #[serde(default = "default_centered")]
        centered: bool,
    },
    /// Law of `weight * Y` where `Y` follows `base`. A zero weight is the
    /// point mass at 0.
    #[serde(alias = "point_scaled_copy")]
    Scaled { base: Box<Marginal>, weight: f64 },
}

fn default_centered() -> bool {
    true
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be finite and positive, got {v}"))
    }
}

/// `P(g >= x)` for standard normal `g`.
pub(crate) fn normal_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

impl Marginal {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Marginal::Gaussian { sigma })
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        positive("scale", scale)?;
        Ok(Marginal::Laplace { scale })
    }

    pub fn uniform(halfwidth: f64) -> Result<Self> {
        positive("halfwidth", halfwidth)?;
        Ok(Marginal::Uniform { halfwidth })
    }

    pub fn half_normal_modulus(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Marginal::HalfNormalModulus { sigma })
    }

    pub fn shifted_exponential(rate: f64, centered: bool) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Marginal::ShiftedExponential { rate, centered })
    }

    /// Law of `weight * Y`. Weight 1 returns `base` unchanged.
    pub fn scaled(base: Marginal, weight: f64) -> Result<Self> {
        if !weight.is_finite() {
            return domain(format!("weight must be finite, got {weight}"));
        }
        base.validate()?;
        if weight == 1.0 {
            return Ok(base);
        }
        Ok(Marginal::Scaled { base: Box::new(base), weight })
    }

    /// The point mass at zero.
    pub fn point_mass() -> Self {
        Marginal::Scaled { base: Box::new(Marginal::Gaussian { sigma: 1.0 }), weight: 0.0 }
    }

    /// Check parameters, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Gaussian { sigma } | Marginal::HalfNormalModulus { sigma } => positive("sigma", *sigma),
            Marginal::Laplace { scale } => positive("scale", *scale),
            Marginal::Uniform { halfwidth } => positive("halfwidth", *halfwidth),
            Marginal::ShiftedExponential { rate, .. } => positive("rate", *rate),
            Marginal::Scaled { base, weight } => {
                if !weight.is_finite() {
                    return domain(format!("weight must be finite, got {weight}"));
                }
                base.validate()
            }
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match self {
            Marginal::Scaled { base, weight } => *weight == 0.0 || base.is_degenerate(),
            _ => false,
        }
    }

    /// `X` and `-X` have the same law.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Marginal::Gaussian { .. } | Marginal::Laplace { .. } | Marginal::Uniform { .. } => true,
            Marginal::HalfNormalModulus { .. } | Marginal::ShiftedExponential { .. } => false,
            Marginal::Scaled { base, weight } => *weight == 0.0 || base.is_symmetric(),
        }
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean() == 0.0
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Gaussian { .. } | Marginal::Laplace { .. } | Marginal::Uniform { .. } => 0.0,
            Marginal::HalfNormalModulus { sigma } => sigma * (2.0 / PI).sqrt(),
            Marginal::ShiftedExponential { rate, centered } => {
                if *centered {
                    0.0
                } else {
                    1.0 / rate
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    weight * base.mean()
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Marginal::Gaussian { sigma } => sigma * sigma,
            Marginal::Laplace { scale } => 2.0 * scale * scale,
            Marginal::Uniform { halfwidth } => halfwidth * halfwidth / 3.0,
            Marginal::HalfNormalModulus { sigma } => sigma * sigma * (1.0 - 2.0 / PI),
            Marginal::ShiftedExponential { rate, .. } => 1.0 / (rate * rate),
            Marginal::Scaled { base, weight } => weight * weight * base.variance(),
        }
    }

    /// Standard deviation; the natural length scale of the family.
    pub fn scale(&self) -> f64 {
        self.variance().sqrt()
    }

    fn check_t(t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 {
            return domain(format!("threshold must be nonnegative, got {t}"));
        }
        Ok(())
    }

    /// `P(|X| >= t)` for `t >= 0`.
    pub fn survival_abs(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        self.validate()?;
        Ok(self.tail(t))
    }

    /// Unchecked `P(|X| >= t)`; callers guarantee `t >= 0` and valid parameters.
    pub(crate) fn tail(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            Marginal::Gaussian { sigma } | Marginal::HalfNormalModulus { sigma } => erfc(t / (sigma * SQRT_2)),
            Marginal::Laplace { scale } => (-t / scale).exp(),
            Marginal::Uniform { halfwidth } => (1.0 - t / halfwidth).max(0.0),
            Marginal::ShiftedExponential { rate, centered } => {
                if *centered {
                    let upper = (-(rate * t + 1.0)).exp();
                    let lower = if rate * t < 1.0 { 1.0 - (-(1.0 - rate * t)).exp() } else { 0.0 };
                    upper + lower
                } else {
                    (-rate * t).exp()
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    base.tail(t / weight.abs())
                }
            }
        }
    }

    /// `P(X >= t)` for any real `t`.
    pub fn survival_signed(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        match self {
            Marginal::Gaussian { sigma } => normal_upper_tail(t / sigma),
            Marginal::Laplace { scale } => {
                if t >= 0.0 {
                    0.5 * (-t / scale).exp()
                } else {
                    1.0 - 0.5 * (t / scale).exp()
                }
            }
            Marginal::Uniform { halfwidth } => ((halfwidth - t) / (2.0 * halfwidth)).clamp(0.0, 1.0),
            Marginal::HalfNormalModulus { sigma } => {
                if t <= 0.0 {
                    1.0
                } else {
                    erfc(t / (sigma * SQRT_2))
                }
            }
            Marginal::ShiftedExponential { rate, centered } => {
                let shift = if *centered { 1.0 / rate } else { 0.0 };
                let z = rate * (t + shift);
                if z <= 0.0 {
                    1.0
                } else {
                    (-z).exp()
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    if t <= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if *weight > 0.0 {
                    base.survival_signed(t / weight)
                } else {
                    // Base laws are continuous, so P(Y <= s) = 1 - P(Y >= s).
                    1.0 - base.survival_signed(t / weight)
                }
            }
        }
    }

    /// `E |X| 1{|X| >= t}` for `t >= 0`.
    pub fn truncated_abs_mean(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        self.validate()?;
        Ok(self.cut_mean(t))
    }

    pub(crate) fn cut_mean(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            Marginal::Gaussian { sigma } | Marginal::HalfNormalModulus { sigma } => {
                (2.0 / PI).sqrt() * sigma * (-t * t / (2.0 * sigma * sigma)).exp()
            }
            Marginal::Laplace { scale } => (t + scale) * (-t / scale).exp(),
            Marginal::Uniform { halfwidth } => {
                if t >= *halfwidth {
                    0.0
                } else {
                    (halfwidth * halfwidth - t * t) / (2.0 * halfwidth)
                }
            }
            Marginal::ShiftedExponential { rate, centered } => {
                let inv = 1.0 / rate;
                if *centered {
                    // Mass above t sits at E/rate >= t + 1/rate; mass below -t at E/rate <= 1/rate - t.
                    let upper = (t + inv) * (-(rate * t + 1.0)).exp();
                    let lower = if t < inv { (inv - t) * (-(1.0 - rate * t)).exp() } else { 0.0 };
                    upper + lower
                } else {
                    (t + inv) * (-rate * t).exp()
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    let a = weight.abs();
                    a * base.cut_mean(t / a)
                }
            }
        }
    }

    /// `E |X|`.
    pub fn abs_mean(&self) -> f64 {
        self.cut_mean(0.0)
    }

    /// `||X||_p = (E|X|^p)^{1/p}` for `p >= 1`.
    pub fn moment_p(&self, p: f64) -> Result<f64> {
        if !(p.is_finite() && p >= 1.0) {
            return domain(format!("moment order must be finite and >= 1, got {p}"));
        }
        self.validate()?;
        Ok(match self {
            Marginal::Gaussian { sigma } | Marginal::HalfNormalModulus { sigma } => {
                let log_abs = 0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0)) - 0.5 * PI.ln();
                sigma * (log_abs / p).exp()
            }
            Marginal::Laplace { scale } => scale * (ln_gamma(p + 1.0) / p).exp(),
            Marginal::Uniform { halfwidth } => halfwidth * (p + 1.0).powf(-1.0 / p),
            Marginal::ShiftedExponential { rate, centered } => {
                if *centered {
                    self.abs_power_mean_by_quadrature(p)?.powf(1.0 / p)
                } else {
                    (ln_gamma(p + 1.0) / p).exp() / rate
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    weight.abs() * base.moment_p(p)?
                }
            }
        })
    }

    /// Density of `X`. The point mass has none and reports 0.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            Marginal::Gaussian { sigma } => normal_density(x / sigma) / sigma,
            Marginal::Laplace { scale } => (-x.abs() / scale).exp() / (2.0 * scale),
            Marginal::Uniform { halfwidth } => {
                if x.abs() <= *halfwidth {
                    0.5 / halfwidth
                } else {
                    0.0
                }
            }
            Marginal::HalfNormalModulus { sigma } => {
                if x < 0.0 {
                    0.0
                } else {
                    2.0 * normal_density(x / sigma) / sigma
                }
            }
            Marginal::ShiftedExponential { rate, centered } => {
                let y = if *centered { x + 1.0 / rate } else { x };
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    base.density(x / weight) / weight.abs()
                }
            }
        }
    }

    /// Closed support `[lo, hi]` of `X` (infinite ends allowed).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::Gaussian { .. } | Marginal::Laplace { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Marginal::Uniform { halfwidth } => (-halfwidth, *halfwidth),
            Marginal::HalfNormalModulus { .. } => (0.0, f64::INFINITY),
            Marginal::ShiftedExponential { rate, centered } => {
                (if *centered { -1.0 / rate } else { 0.0 }, f64::INFINITY)
            }
            Marginal::Scaled { base, weight } => {
                let (lo, hi) = base.support();
                if *weight == 0.0 {
                    (0.0, 0.0)
                } else if *weight > 0.0 {
                    (weight * lo, weight * hi)
                } else {
                    (weight * hi, weight * lo)
                }
            }
        }
    }

    /// Integrate `h(|x|) f(x)` over `{|x| >= t}` on the window
    /// `[t, t + width]` on each side of the origin, clipped to the support.
    fn integrate_modulus<H: Fn(f64) -> f64>(&self, t: f64, width: f64, h: H) -> Result<f64> {
        let (lo, hi) = self.support();
        let mut total = 0.0;
        // Positive side: x in [t, t + width] ∩ [lo, hi].
        let a = t.max(lo);
        let b = (t + width).min(hi);
        if a < b {
            total += quadrature::integrate(|x| h(x) * self.density(x), a, b, QUAD_REL_TOL, 1e-300)?.value;
        }
        // Negative side: x in [-(t + width), -t] ∩ [lo, hi], excluding the origin twice.
        let a = (-(t + width)).max(lo);
        let b = (-t).min(hi);
        if a < b {
            total += quadrature::integrate(|x| h(-x) * self.density(x), a, b, QUAD_REL_TOL, 1e-300)?.value;
        }
        Ok(total)
    }

    fn quadrature_window(&self, p: f64) -> f64 {
        (TAIL_WINDOW + 4.0 * p) * self.scale().max(self.mean().abs())
    }

    /// `P(|X| >= t)` by quadrature of the density.
    pub fn survival_abs_by_quadrature(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        if self.is_degenerate() {
            return Ok(if t == 0.0 { 1.0 } else { 0.0 });
        }
        self.integrate_modulus(t, self.quadrature_window(0.0), |_| 1.0)
    }

    /// `E |X| 1{|X| >= t}` by quadrature of the density.
    pub fn truncated_abs_mean_by_quadrature(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        if self.is_degenerate() {
            return Ok(0.0);
        }
        self.integrate_modulus(t, self.quadrature_window(1.0), |x| x)
    }

    /// `E |X|^p` by quadrature of the density.
    pub fn abs_power_mean_by_quadrature(&self, p: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(0.0);
        }
        self.integrate_modulus(0.0, self.quadrature_window(p), |x| x.powf(p))
    }

    /// Mean by quadrature; used to check centering.
    pub fn mean_by_quadrature(&self) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(0.0);
        }
        let (lo, hi) = self.support();
        let w = self.quadrature_window(1.0);
        let c = self.mean();
        let a = lo.max(c - w);
        let b = hi.min(c + w);
        // Split at 0 so the Laplace kink is an endpoint.
        let mut total = 0.0;
        for (x0, x1) in [(a, b.min(0.0)), (a.max(0.0), b)] {
            if x0 < x1 {
                total += quadrature::integrate(|x| x * self.density(x), x0, x1, QUAD_REL_TOL, 1e-300)?.value;
            }
        }
        Ok(total)
    }

    /// Supremum over `p >= q >= 2` of `(||X||_p / ||X||_q) * (q / p)`.
    ///
    /// For every catalog family `p -> ||X||_p / p` is nonincreasing on
    /// `[2, inf)`, so the supremum is attained at `p = q` and equals 1.
    pub fn moment_growth_constant(&self) -> f64 {
        1.0
    }

    /// `max_{p in grid, p >= 2} ||X||_{2p} / ||X||_p`.
    pub fn moment_doubling_constant(&self, p_grid: &[f64]) -> Result<f64> {
        let mut beta: f64 = 0.0;
        for &p in p_grid.iter().filter(|&&p| p >= 2.0) {
            let lo = self.moment_p(p)?;
            if lo > 0.0 {
                beta = beta.max(self.moment_p(2.0 * p)? / lo);
            }
        }
        Ok(beta)
    }

    /// One draw of `X`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Marginal::Laplace { scale } => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            }
            Marginal::Uniform { halfwidth } => halfwidth * (2.0 * rng.random::<f64>() - 1.0),
            Marginal::HalfNormalModulus { sigma } => sigma * rng.sample::<f64, _>(StandardNormal).abs(),
            Marginal::ShiftedExponential { rate, centered } => {
                let e: f64 = rng.sample(Exp1);
                if *centered {
                    (e - 1.0) / rate
                } else {
                    e / rate
                }
            }
            Marginal::Scaled { base, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    weight * base.sample(rng)
                }
            }
        }
    }

    /// Short human-readable descriptor, e.g. `laplace(1)`.
    pub fn label(&self) -> String {
        match self {
            Marginal::Gaussian { sigma } => format!("gaussian({sigma})"),
            Marginal::Laplace { scale } => format!("laplace({scale})"),
            Marginal::Uniform { halfwidth } => format!("uniform({halfwidth})"),
            Marginal::HalfNormalModulus { sigma } => format!("half_normal_modulus({sigma})"),
            Marginal::ShiftedExponential { rate, centered } => {
                format!("shifted_exponential({rate}{})", if *centered { ",centered" } else { "" })
            }
            Marginal::Scaled { base, weight } => format!("{weight}*{}", base.label()),
        }
    }
}

/// Every family of the catalog at a representative parameter; used by the
/// lemma grid and by tests.
pub fn catalog() -> Vec<Marginal> {
    vec![
        Marginal::Gaussian { sigma: 1.0 },
        Marginal::Gaussian { sigma: 2.5 },
        Marginal::Laplace { scale: 1.0 },
        Marginal::Laplace { scale: 1.0 / SQRT_2 },
        Marginal::Uniform { halfwidth: 1.0 },
        Marginal::Uniform { halfwidth: 3f64.sqrt() },
        Marginal::HalfNormalModulus { sigma: 1.0 },
        Marginal::ShiftedExponential { rate: 1.0, centered: true },
        Marginal::ShiftedExponential { rate: 2.0, centered: false },
        Marginal::Scaled { base: Box::new(Marginal::Laplace { scale: 1.0 }), weight: -0.5 },
        Marginal::Scaled { base: Box::new(Marginal::ShiftedExponential { rate: 1.0, centered: true }), weight: 3.0 },
    ]
}

/// `1/e`, the Grünbaum lower bound on `P(X >= 0)` for mean-zero log-concave `X`.
pub const GRUNBAUM_BOUND: f64 = 1.0 / E;
