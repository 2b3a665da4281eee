//! Bracketed bisection for nonincreasing functions.

use crate::error::{Error, Result};

/// Outcome of [`bisect_nonincreasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    /// Smallest point found with `g(hi) <= level`.
    pub hi: f64,
    /// Largest point found with `g(lo) > level`.
    pub lo: f64,
    pub iterations: usize,
}

/// Locate `inf { t : g(t) <= level }` for a nonincreasing `g`, given
/// `g(lo) > level` and `g(hi) <= level`.
///
/// Bisects until the bracket is narrower than `x_tol` or cannot shrink in
/// floating point. On a plateau `g == level` the left end is returned.
pub fn bisect_nonincreasing<G: Fn(f64) -> f64>(
    g: G,
    level: f64,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<Bisection> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut iterations = 0;
    while hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if iterations == max_iter {
            return Err(Error::Numerical(format!(
                "bisection stalled after {max_iter} iterations on [{lo}, {hi}]"
            )));
        }
        iterations += 1;
        if g(mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bisection { hi, lo, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_crossing_of_linear_function() {
        let b = bisect_nonincreasing(|t| 1.0 - t, 0.25, 0.0, 1.0, 1e-14, 200).unwrap();
        assert!((b.hi - 0.75).abs() < 1e-14);
        assert!(b.lo <= b.hi);
    }

    #[test]
    fn plateau_returns_left_end() {
        let g = |t: f64| if t < 0.3 { 1.0 } else if t < 0.6 { 0.5 } else { 0.0 };
        let b = bisect_nonincreasing(g, 0.5, 0.0, 1.0, 1e-13, 200).unwrap();
        assert!((b.hi - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_bracket() {
        assert!(bisect_nonincreasing(|t| -t, 0.0, 1.0, 1.0, 1e-12, 10).is_err());
    }
}
