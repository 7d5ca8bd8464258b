//! Run configuration for the generic construction.
//!
//! ```json
//! {
//!   "params": {"rho": -3, "b": 1},
//!   "profile": {"alpha0": 0.6, "a0_re": 0.3, "a0_im": 0.4,
//!               "alpha_min": 0.4, "alpha_max": 1.2, "tol": 1e-12},
//!   "potential": {"K0": 0, "Kprime0": 1},
//!   "harmonic": {"coeffs": [[0, 0], [1, 0]]},
//!   "grid": {"x0": 0, "x1": 1, "y0": 0, "y1": 1, "nx": 81, "ny": 81},
//!   "nu0": 0,
//!   "thresholds": {"identity_tol": 1e-10, "order_band": [1.7, 2.3]},
//!   "appendix_reconciliation": "assume",
//!   "t9_mode": "as_printed",
//!   "jet_order": 4
//! }
//! ```
//!
//! `harmonic.coeffs` are the Taylor coefficients of a holomorphic `g` with
//! `f = Re g`; with `"rescale": true` they are first mapped affinely so that
//! `f` spans the potential range over the grid. Every section except `params`, `profile`, `harmonic` and
//! `grid` may be omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{CoeffOptions, Reconciliation, T9Mode};
use crate::construct::GenericInput;
use crate::grid::{GridDomain, GridError, HarmonicInput};
use crate::jets::{DEFAULT_ORDER, MAX_ORDER};
use crate::params::{ModelParams, ParamsError};
use crate::profile::{Normalization, ProfileOptions};
use crate::verify::{Thresholds, VerifyOptions};
use crate::C64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0} must be positive and finite, got {1}")]
    Tolerance(&'static str, f64),
    #[error("order_band [{0}, {1}] must satisfy 0 < lo < hi")]
    OrderBand(f64, f64),
    #[error("alpha_min = {0}, alpha_max = {1}: need 0 < alpha_min < alpha_max < pi")]
    AlphaRange(f64, f64),
    #[error("alpha0 = {0} is outside [alpha_min, alpha_max]")]
    Alpha0(f64),
    #[error("Kprime0 must be positive, got {0}")]
    Kprime0(f64),
    #[error("jet_order must be in 1..={MAX_ORDER}, got {0}")]
    JetOrder(usize),
    #[error("harmonic.coeffs must contain at least one non-constant term")]
    ConstantHarmonic,
    #[error("{0} is not finite")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub rho: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub alpha0: f64,
    pub a0_re: f64,
    pub a0_im: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSection {
    pub coeffs: Vec<[f64; 2]>,
    /// Affinely rescale `f` on the grid onto the whole potential range, so the
    /// angle sweeps `[alpha_min, alpha_max]`.
    #[serde(default)]
    pub rescale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default = "default_identity_tol")]
    pub identity_tol: f64,
    #[serde(default = "default_band")]
    pub order_band: [f64; 2],
}

fn default_identity_tol() -> f64 {
    1e-10
}

fn default_band() -> [f64; 2] {
    [1.7, 2.3]
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection {
            identity_tol: default_identity_tol(),
            order_band: default_band(),
        }
    }
}

fn default_jet_order() -> usize {
    DEFAULT_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub profile: ProfileSection,
    #[serde(default)]
    pub potential: Normalization,
    pub harmonic: HarmonicSection,
    pub grid: GridDomain,
    #[serde(default)]
    pub nu0: f64,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub appendix_reconciliation: Reconciliation,
    #[serde(default)]
    pub t9_mode: T9Mode,
    /// Highest jet order the coefficient cascade may use.
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams::new(self.params.rho, self.params.b)
    }

    pub fn a0(&self) -> C64 {
        C64::new(self.profile.a0_re, self.profile.a0_im)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model_params().validate_nonflat()?;
        self.grid.validate()?;
        let p = &self.profile;
        for (name, v) in [
            ("profile.a0_re", p.a0_re),
            ("profile.a0_im", p.a0_im),
            ("nu0", self.nu0),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::NonFinite(name));
            }
        }
        positive("profile.tol", p.tol)?;
        positive("thresholds.identity_tol", self.thresholds.identity_tol)?;
        let [lo, hi] = self.thresholds.order_band;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(ConfigError::OrderBand(lo, hi));
        }
        if !(p.alpha_min > 0.0 && p.alpha_min < p.alpha_max && p.alpha_max < std::f64::consts::PI) {
            return Err(ConfigError::AlphaRange(p.alpha_min, p.alpha_max));
        }
        if !(p.alpha_min..=p.alpha_max).contains(&p.alpha0) {
            return Err(ConfigError::Alpha0(p.alpha0));
        }
        if !self.potential.k0.is_finite() {
            return Err(ConfigError::NonFinite("potential.K0"));
        }
        if !(self.potential.kprime0 > 0.0 && self.potential.kprime0.is_finite()) {
            return Err(ConfigError::Kprime0(self.potential.kprime0));
        }
        if !(1..=MAX_ORDER).contains(&self.jet_order) {
            return Err(ConfigError::JetOrder(self.jet_order));
        }
        self.harmonic_input()?;
        Ok(())
    }

    pub fn harmonic_input(&self) -> Result<HarmonicInput, ConfigError> {
        let coeffs: Vec<C64> = self.harmonic.coeffs.iter().map(|&[re, im]| C64::new(re, im)).collect();
        if coeffs.iter().skip(1).all(|c| *c == C64::new(0.0, 0.0)) {
            return Err(ConfigError::ConstantHarmonic);
        }
        Ok(HarmonicInput::new(coeffs)?)
    }

    pub fn generic_input(&self) -> Result<GenericInput, ConfigError> {
        let p = &self.profile;
        Ok(GenericInput {
            params: self.model_params(),
            alpha0: p.alpha0,
            a0: self.a0(),
            alpha_range: (p.alpha_min, p.alpha_max),
            tol: p.tol,
            normalization: self.potential,
            harmonic: self.harmonic_input()?,
            grid: self.grid,
            nu0: self.nu0,
            sing_guard: ProfileOptions::default().sing_guard,
        })
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            thresholds: Thresholds {
                identity_tol: self.thresholds.identity_tol,
                order_band: self.thresholds.order_band,
                ..Default::default()
            },
            coeffs: CoeffOptions {
                reconciliation: self.appendix_reconciliation,
                t9_mode: self.t9_mode,
                max_order: self.jet_order,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Tolerance(name, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "params": {"rho": -3, "b": 1},
        "profile": {"alpha0": 0.6, "a0_re": 0.3, "a0_im": 0.4, "alpha_min": 0.4, "alpha_max": 1.2},
        "harmonic": {"coeffs": [[0, 0], [1, 0]]},
        "grid": {"x0": 0, "x1": 1, "y0": 0, "y1": 1, "nx": 17, "ny": 17}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.potential, Normalization::default());
        assert_eq!(c.t9_mode, T9Mode::AsPrinted);
        assert_eq!(c.jet_order, DEFAULT_ORDER);
        assert_eq!(c.thresholds.order_band, [1.7, 2.3]);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("\"nx\": 17", "\"nx\": 17, \"nz\": 3");
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replace("\"params\"", "\"extra\": 1, \"params\"");
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn flat_rejected() {
        let text = MINIMAL.replace("\"rho\": -3", "\"rho\": 0");
        assert!(matches!(
            RunConfig::from_json(&text),
            Err(ConfigError::Params(ParamsError::FlatAmbient))
        ));
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let text = MINIMAL.replace("\"alpha_max\": 1.2", "\"alpha_max\": 1.2, \"tol\": 0");
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::Tolerance(..))));
    }

    #[test]
    fn constant_harmonic_rejected() {
        let text = MINIMAL.replace("[[0, 0], [1, 0]]", "[[0.5, 0]]");
        assert!(matches!(
            RunConfig::from_json(&text),
            Err(ConfigError::ConstantHarmonic)
        ));
    }
}
