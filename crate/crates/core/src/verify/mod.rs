//! Instantiates the bounds on grids of models and reports the outcome.

pub mod calibration;
pub mod checks;
pub mod identities;
pub mod lemmas;
pub mod suite;

pub use calibration::{Calibration, Window};
pub use checks::{
    check_cor_isotropic, check_prop_upper, check_thm_kmax, check_thm_logconcave, check_thm_negcorr,
    check_thm_revkmax, check_weak_strong, CheckOptions, Evidence,
};
pub use suite::{run_suite, Family, GridConfig, KSpec, Suite, SuiteConfig};
