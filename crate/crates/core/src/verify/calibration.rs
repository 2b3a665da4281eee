//! Frozen windows for ratios whose constants are only known to exist.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::BoundReport;

/// Ratios that receive a calibrated window.
pub const CALIBRATED_IDS: [&str; 8] = [
    "thm13.ratio",
    "thm14.ratio",
    "thm15.mean_ratio",
    "thm15.multiplier",
    "cor16.kmax_tstar",
    "cor16.kmax_t",
    "cor16.kmin",
    "weakstrong.C",
];

/// Windows are `[FLOOR_FACTOR * min, CAP_FACTOR * max]` over the sweep.
pub const FLOOR_FACTOR: f64 = 0.5;
pub const CAP_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub floor: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Seed of the sweep that produced the windows.
    pub seed: u64,
    pub samples: usize,
    pub rule: String,
    pub windows: BTreeMap<String, Window>,
}

const FROZEN: &str = include_str!("../../calibration.json");

impl Calibration {
    /// The windows shipped with the crate.
    pub fn frozen() -> Self {
        Self::from_json(FROZEN).expect("bundled calibration file parses")
    }

    /// No windows: every calibrated ratio is reported as informational.
    pub fn empty() -> Self {
        Calibration { seed: 0, samples: 0, rule: String::new(), windows: BTreeMap::new() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("calibration file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes") + "\n"
    }

    pub fn window(&self, id: &str) -> Option<Window> {
        self.windows.get(id).copied()
    }

    /// Windows from the ratios of a sweep, skipping rows whose hypotheses
    /// were not met.
    pub fn from_sweep(reports: &[BoundReport], seed: u64, samples: usize) -> Self {
        let mut windows = BTreeMap::new();
        for id in CALIBRATED_IDS {
            let ratios: Vec<f64> = reports
                .iter()
                .filter(|r| r.theorem_id == id && r.hypotheses_met && r.ratio.is_finite())
                .map(|r| r.ratio)
                .collect();
            if ratios.is_empty() {
                continue;
            }
            let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            windows.insert(id.to_string(), Window { floor: FLOOR_FACTOR * min, cap: CAP_FACTOR * max });
        }
        Calibration {
            seed,
            samples,
            rule: format!("floor = {FLOOR_FACTOR} * sweep minimum, cap = {CAP_FACTOR} * sweep maximum"),
            windows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_file_covers_every_id() {
        let c = Calibration::frozen();
        for id in CALIBRATED_IDS {
            let w = c.window(id).unwrap_or_else(|| panic!("missing window {id}"));
            assert!(w.floor > 0.0 && w.floor < w.cap, "{id}: {w:?}");
        }
        assert!(c.samples > 0);
    }

    #[test]
    fn sweep_rule() {
        let rows = vec![
            BoundReport::new("thm13.ratio", "a", 4).informational(1.0, 0.0, 2.0),
            BoundReport::new("thm13.ratio", "b", 4).informational(3.0, 0.0, 2.0),
            BoundReport::new("thm13.ratio", "c", 4).informational(90.0, 0.0, 1.0).unmet("skip"),
            BoundReport::new("thm13.ratio", "d", 4).informational(0.01, 0.0, 1.0).illustration("outside"),
        ];
        let c = Calibration::from_sweep(&rows, 5, 100);
        let w = c.window("thm13.ratio").unwrap();
        assert_eq!((w.floor, w.cap), (0.25, 3.0));
        assert!(c.window("thm14.ratio").is_none());
        assert_eq!(Calibration::from_json(&c.to_json()).unwrap(), c);
    }
}
