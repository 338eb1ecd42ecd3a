//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleKind, EnsembleParams};
use crate::error::{Error, Result};
use crate::hilbert::IntervalMode;

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_R: u32 = 3;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_BUDGET_SECONDS: f64 = 30.0;
pub const DEFAULT_N: usize = 16;
pub const DEFAULT_COUNT: usize = 8;

/// Every setting, each optional. Used for the file and for the flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub scale_exponent: Option<i32>,
    pub gamma: Option<f64>,
    pub r: Option<u32>,
    pub interval_mode: Option<IntervalMode>,
    pub tolerance: Option<f64>,
    pub budget_seconds: Option<f64>,
    pub kind: Option<EnsembleKind>,
    pub n: Option<usize>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` with every setting present in `flags` replaced.
    pub fn overlay(self, flags: &Settings) -> Settings {
        Settings {
            scale_exponent: flags.scale_exponent.or(self.scale_exponent),
            gamma: flags.gamma.or(self.gamma),
            r: flags.r.or(self.r),
            interval_mode: flags.interval_mode.or(self.interval_mode),
            tolerance: flags.tolerance.or(self.tolerance),
            budget_seconds: flags.budget_seconds.or(self.budget_seconds),
            kind: flags.kind.or(self.kind),
            n: flags.n.or(self.n),
            count: flags.count.or(self.count),
            seed: flags.seed.or(self.seed),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let cfg = RunConfig {
            scale_exponent: self.scale_exponent,
            gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
            r: self.r.unwrap_or(DEFAULT_R),
            interval_mode: self.interval_mode.unwrap_or_default(),
            tolerance: self.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            budget_seconds: self.budget_seconds.unwrap_or(DEFAULT_BUDGET_SECONDS),
            seed: self.seed.unwrap_or(0),
        };
        if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma {} outside (0, 1)", cfg.gamma)));
        }
        if !(cfg.tolerance >= 0.0 && cfg.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance {}", cfg.tolerance)));
        }
        if !(cfg.budget_seconds > 0.0) {
            return Err(Error::InvalidParameter(format!("budget {} s", cfg.budget_seconds)));
        }
        Ok(cfg)
    }

    /// Ensemble parameters, when a kind is set.
    pub fn ensemble(&self) -> Option<EnsembleParams> {
        self.kind.map(|kind| EnsembleParams {
            kind,
            n: self.n.unwrap_or(DEFAULT_N),
            count: self.count.unwrap_or(DEFAULT_COUNT),
            seed: self.seed.unwrap_or(0),
        })
    }
}

/// The effective configuration of a run; echoed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scale_exponent: Option<i32>,
    pub gamma: f64,
    pub r: u32,
    pub interval_mode: IntervalMode,
    pub tolerance: f64,
    pub budget_seconds: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Settings::default().resolve().expect("defaults are valid")
    }
}
