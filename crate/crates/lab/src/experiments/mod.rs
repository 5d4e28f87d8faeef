//! Monte Carlo experiment drivers.
//!
//! Every driver follows the same shape: replica `r` draws its environment
//! from `RngStream::new(master_seed, stream_id(r))`, workers fan out over
//! replicas through [`crate::parallel::run_replicas`], and the reduction
//! runs sequentially in replica order so a run is bit-identical for any
//! worker count. Annealed quantities are averages of exact quenched
//! quantities computed per environment, never path-sampling estimates,
//! which removes the path-level Monte Carlo noise entirely.
//!
//! Each driver returns an [`ExperimentOutcome`]: the check rows plus an
//! optional CSV table of the raw statistics behind them.

pub mod boundary_free_endpoint;
pub mod burke;
pub mod chi;
pub mod clt;
pub mod duality;
pub mod fixed_point;
pub mod free_endpoint;
pub mod lln;
pub mod mean;
pub mod var_identity;
pub mod zeta;

use polymer_core::stats::KsResult;
use polymer_core::ModelParams;

pub use crate::config::Tolerances;
use crate::report::{Check, CsvTable, ExperimentReport};
use crate::LabError;

/// Report plus optional CSV sidecar produced by one experiment run.
#[derive(Debug)]
pub struct ExperimentOutcome {
    /// Parameters, check rows, and verdict.
    pub report: ExperimentReport,
    /// Raw statistics table, for experiments that define a CSV schema.
    pub csv: Option<CsvTable>,
}

/// Validates model parameters, reporting violations as config errors so the
/// CLI can exit with the config status code.
pub(crate) fn model_params(theta: f64, mu: f64) -> Result<ModelParams, LabError> {
    ModelParams::new(theta, mu).map_err(|e| LabError::Config(e.to_string()))
}

/// Row asserting `observed` lies within `sigma_mult` standard errors of
/// `target`.
pub(crate) fn sigma_check(
    id: &str,
    criterion: &str,
    description: &str,
    observed: f64,
    target: f64,
    stderr: f64,
    sigma_mult: f64,
) -> Check {
    Check::band(
        id,
        criterion,
        description,
        observed,
        target - sigma_mult * stderr,
        target + sigma_mult * stderr,
    )
    .with("target", target)
    .with("stderr", stderr)
}

/// Row asserting a Kolmogorov-Smirnov p-value clears the configured floor.
pub(crate) fn ks_check(
    id: &str,
    criterion: &str,
    description: &str,
    ks: &KsResult,
    p_threshold: f64,
) -> Check {
    Check::at_least(id, criterion, description, ks.p_value, p_threshold)
        .with("ks_statistic", ks.statistic)
        .with("n_effective", ks.n_effective)
}

/// Unwraps per-replica results, surfacing the first failure.
pub(crate) fn collect_replicas<T>(
    results: Vec<Result<T, polymer_core::Error>>,
) -> Result<Vec<T>, LabError> {
    results
        .into_iter()
        .collect::<Result<Vec<T>, _>>()
        .map_err(LabError::from)
}
