//! Run configuration: TOML file values, environment fallback, defaults.
//!
//! Precedence per knob: explicit CLI flag, then config-file value, then the
//! `POLYMER_SEED` environment variable (seed only), then the built-in
//! default. Unknown keys in the file are rejected. The merged values are
//! echoed into every report's `parameters` block, so a report is a complete
//! run manifest on its own.

use std::path::Path;

use serde::Deserialize;

use crate::LabError;

/// Optional values loadable from a TOML config file. Key names match the
/// long CLI flags with dashes replaced by underscores.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Boundary shape parameter.
    pub theta: Option<f64>,
    /// Bulk shape parameter.
    pub mu: Option<f64>,
    /// Horizontal direction component (bulk law of large numbers).
    pub s: Option<f64>,
    /// Vertical direction component (bulk law of large numbers).
    pub t: Option<f64>,
    /// Rectangle width for fixed-size experiments.
    pub m: Option<usize>,
    /// Rectangle height for fixed-size experiments, or the scale `N`.
    pub n: Option<usize>,
    /// List of scales for exponent fits.
    pub n_list: Option<Vec<usize>>,
    /// Replica count (base count at the smallest scale where schedules
    /// apply).
    pub reps: Option<usize>,
    /// Crossing level fraction.
    pub tau: Option<f64>,
    /// Off-characteristic exponent.
    pub alpha: Option<f64>,
    /// Off-characteristic displacement coefficient.
    pub c1: Option<f64>,
    /// Master seed.
    pub seed: Option<u64>,
    /// Worker thread count.
    pub workers: Option<usize>,
    /// Sigma multiplier for moment bands.
    pub sigma_mult: Option<f64>,
    /// p-value floor for distributional tests.
    pub p_threshold: Option<f64>,
}

impl FileConfig {
    /// Loads and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }
}

/// Statistical pass thresholds applied uniformly across experiments.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Moment checks pass within `sigma_mult` standard errors.
    pub sigma_mult: f64,
    /// Distributional tests pass when the p-value is at least this.
    pub p_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sigma_mult: 4.0,
            p_threshold: 1e-3,
        }
    }
}

/// Default master seed when nothing else specifies one.
pub const DEFAULT_SEED: u64 = 42;

/// Resolves the master seed: explicit value, then file value, then the
/// `POLYMER_SEED` environment variable, then [`DEFAULT_SEED`].
pub fn resolve_seed(cli: Option<u64>, file: Option<u64>) -> Result<u64, LabError> {
    if let Some(s) = cli.or(file) {
        return Ok(s);
    }
    match std::env::var("POLYMER_SEED") {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| LabError::Config(format!("POLYMER_SEED is not a u64: {text:?}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}
