//! Threshold functionals `t(k, X)` and `t*(p, X)` for random vectors with
//! log-concave coordinates, Monte Carlo estimators for order statistics and
//! top-k sums of coordinate moduli, and a harness that checks the two-sided
//! bounds relating them.

pub mod error;
pub mod marginals;
pub mod models;
pub mod montecarlo;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod roots;
pub mod stats;
pub mod thresholds;
pub mod verify;

pub use error::{Error, Result};
pub use marginals::Marginal;
pub use models::{ModelConfig, VectorModel};
