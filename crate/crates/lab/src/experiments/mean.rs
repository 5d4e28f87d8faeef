//! Sample mean of `log Z` against the exact digamma formula.

use std::time::Instant;

use polymer_core::lattice::streaming_corner_boundary;
use polymer_core::specfun::mean_logz;
use polymer_core::stats::McSummary;
use polymer_core::RngStream;

use super::{collect_replicas, model_params, sigma_check, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{CsvTable, ExperimentReport};
use crate::LabError;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct MeanConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Rectangle width.
    pub m: usize,
    /// Rectangle height.
    pub n: usize,
    /// Replica count.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            theta: 0.7,
            mu: 1.5,
            m: 20,
            n: 30,
            reps: 10_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Estimates `E[log Z_{m,n}]` over independent boundary environments and
/// checks it against `-m psi0(theta) - n psi0(mu - theta)`.
pub fn run(cfg: &MeanConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if cfg.m == 0 || cfg.n == 0 || cfg.reps < 2 {
        return Err(LabError::Config(String::from(
            "mean experiment needs m, n >= 1 and reps >= 2",
        )));
    }

    let (m, n, seed) = (cfg.m, cfg.n, cfg.seed);
    let values = collect_replicas(run_replicas(cfg.reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, r as u64);
        streaming_corner_boundary(m, n, params, &mut rng)
    }))?;

    let mut acc = McSummary::new();
    let mut csv = CsvTable::new("replica,logZ");
    for (r, &lz) in values.iter().enumerate() {
        acc.push(lz);
        csv.rows.push(format!("{r},{lz}"));
    }

    let target = mean_logz(m, n, params);
    let mut report = ExperimentReport::new("mean", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("m", m as u64);
    report.param("n", n as u64);
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("sigma_mult", cfg.tol.sigma_mult);
    report.push(
        sigma_check(
            "mean_logz",
            "AC2",
            "sample mean of log Z matches -m psi0(theta) - n psi0(mu - theta)",
            acc.mean(),
            target,
            acc.stderr_mean(),
            cfg.tol.sigma_mult,
        )
        .with("sample_variance", acc.variance()),
    );
    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}
