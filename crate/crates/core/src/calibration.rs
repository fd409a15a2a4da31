//! Recorded constants for the equivalences whose implied constants are not
//! explicit.
//!
//! Every entry is the observed `[min, max]` of a ratio on a reference run
//! (fixed parameters and [`REFERENCE_SEED`]). A reference rerun must
//! reproduce the recorded extremes to [`REGRESSION_TOL`]; any other run
//! must stay inside the recorded window widened by the recorded margin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counterexamples::{thm42_verify, thm52_verify, WeightSequence};
use crate::error::{Error, Result};
use crate::grid::Exponent;
use crate::inequalities::{run_suite, Suite};
use crate::report::Check;

pub use crate::inequalities::REFERENCE_SEED;

pub const CALIBRATION_VERSION: u32 = 1;
pub const REGRESSION_TOL: f64 = 1e-9;
/// Relative widening applied to recorded windows for non-reference runs.
pub const DEFAULT_MARGIN: f64 = 0.1;

const RECORDED: &str = include_str!("../calibration.json");

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// `[lo / (1+m), hi·(1+m)]` for positive windows.
    pub fn widened(&self, margin: f64) -> Self {
        Self { lo: self.lo / (1.0 + margin), hi: self.hi * (1.0 + margin) }
    }

    /// Both ends agree to relative tolerance `tol`.
    pub fn matches(&self, other: &Window, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs());
        close(self.lo, other.lo) && close(self.hi, other.hi)
    }
}

/// Reference configuration of the dilation example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm42Reference {
    pub p: f64,
    pub k_max: u32,
    pub j_max: u32,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
}

pub const THM42_REFERENCE: Thm42Reference =
    Thm42Reference { p: 1.5, k_max: 8, j_max: 8, alpha: 0.1, trials: 200, seed: REFERENCE_SEED };

/// Reference configuration of the translates example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm52Reference {
    pub p: f64,
    pub k_max: u32,
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
}

pub const THM52_REFERENCE: Thm52Reference =
    Thm52Reference { p: 4.0, k_max: 6, n_max: 8, trials: 200, seed: REFERENCE_SEED };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    pub reference_seed: u64,
    pub margin: f64,
    pub windows: BTreeMap<String, Window>,
}

impl Calibration {
    /// The constants shipped with the crate.
    pub fn recorded() -> Result<Self> {
        Self::from_json(RECORDED)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: Self = serde_json::from_str(text)?;
        if cal.version != CALIBRATION_VERSION {
            return Err(Error::Config(format!(
                "calibration version {} does not match {}",
                cal.version, CALIBRATION_VERSION
            )));
        }
        Ok(cal)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes") + "\n"
    }

    pub fn window(&self, key: &str) -> Option<Window> {
        self.windows.get(key).copied()
    }

    /// Regression check of an observed window: exact reproduction on a
    /// reference run, containment in the widened window otherwise.
    pub fn check(&self, key: &str, observed: Window, reference: bool) -> Check {
        let name = format!("calibration.{key}");
        let Some(rec) = self.window(key) else {
            return Check::new(name, false, "no recorded window");
        };
        if reference {
            Check::new(
                name,
                rec.matches(&observed, REGRESSION_TOL),
                format!("observed [{}, {}] vs recorded [{}, {}]", observed.lo, observed.hi, rec.lo, rec.hi),
            )
        } else {
            let wide = rec.widened(self.margin);
            Check::new(
                name,
                wide.contains(&observed),
                format!("observed [{}, {}] within [{}, {}]", observed.lo, observed.hi, wide.lo, wide.hi),
            )
        }
    }
}

pub fn thm42_weights(r: &Thm42Reference) -> Result<WeightSequence> {
    WeightSequence::power_law_tail(r.alpha, r.k_max as usize, Exponent::new(r.p)?)
}

pub fn thm52_weights(r: &Thm52Reference) -> Result<WeightSequence> {
    WeightSequence::harmonic_square(r.k_max as usize, Exponent::new(r.p)?)
}

/// Runs every reference configuration and records the observed windows.
pub fn calibrate() -> Result<Calibration> {
    let mut windows = BTreeMap::new();
    let r = THM42_REFERENCE;
    let rep = thm42_verify(&thm42_weights(&r)?, Exponent::new(r.p)?, r.j_max, r.trials, r.seed)?;
    windows.insert("thm42".to_string(), Window::new(rep.ratio_min, rep.ratio_max));
    let r = THM52_REFERENCE;
    let rep = thm52_verify(&thm52_weights(&r)?, Exponent::new(r.p)?, r.n_max, r.trials, r.seed)?;
    windows.insert("thm52".to_string(), Window::new(rep.ratio_min, rep.ratio_max));
    for suite in Suite::ALL {
        let outcome = run_suite(suite, &suite.reference())?;
        windows.extend(outcome.observed);
    }
    Ok(Calibration { version: CALIBRATION_VERSION, reference_seed: REFERENCE_SEED, margin: DEFAULT_MARGIN, windows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_algebra() {
        let w = Window::new(1.0, 2.0);
        assert!(w.contains(&Window::new(1.0, 1.5)));
        assert!(!w.contains(&Window::new(0.5, 1.5)));
        assert!(w.widened(0.1).contains(&Window::new(0.95, 2.1)));
        assert!(w.matches(&Window::new(1.0 + 1e-12, 2.0), 1e-9));
    }

    #[test]
    fn recorded_constants_load() {
        let cal = Calibration::recorded().unwrap();
        assert_eq!(cal.reference_seed, REFERENCE_SEED);
        for key in ["thm42", "thm52", "squarefunc.p3", "squarefunc.p4", "lacunary.p4", "rdf.p3", "rdf.p4"] {
            let w = cal.window(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(w.lo <= w.hi && w.lo > 0.0);
        }
    }

    #[test]
    fn unknown_key_fails_check() {
        let cal = Calibration::recorded().unwrap();
        assert!(!cal.check("nope", Window::new(1.0, 1.0), true).passed);
    }
}
