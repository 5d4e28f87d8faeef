//! Law of large numbers for the bulk partition function.
//!
//! Along the ray `(Ns, Nt)` the bulk `log Z` divided by `N` converges to
//! the explicit free energy. The driver checks the mean at one scale, the
//! decay of the tail mass beyond `b N^{1/3}`, and a deterministic coupled
//! comparison against the boundary model sharing the same bulk weights:
//! every boundary partition function dominates the bulk one times the
//! first axis weight, because the paths entering the bulk immediately form
//! a subset of all admissible paths.

use std::time::Instant;

use polymer_core::lattice::{bulk_logz, forward_logz, streaming_corner_bulk};
use polymer_core::randenv::build_env;
use polymer_core::specfun::free_energy_pt;
use polymer_core::stats::McSummary;
use polymer_core::{Environment, RngStream};

use super::{collect_replicas, model_params, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, CsvTable, ExperimentReport};
use crate::LabError;

/// Replicas entering the coupled boundary comparison.
const COUPLED_REPS: usize = 100;
/// Tail thresholds in units of `N^{1/3}`.
const TAIL_BS: [f64; 3] = [1.0, 2.0, 4.0];

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct LlnConfig {
    /// Horizontal direction component.
    pub s: f64,
    /// Vertical direction component.
    pub t: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Scale `N`.
    pub n_scale: usize,
    /// Replica count.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for LlnConfig {
    fn default() -> Self {
        LlnConfig {
            s: 1.0,
            t: 1.0,
            mu: 2.0,
            n_scale: 512,
            reps: 1_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Checks the bulk free energy and tail decay at one scale.
pub fn run(cfg: &LlnConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    if !(cfg.s > 0.0 && cfg.s.is_finite() && cfg.t > 0.0 && cfg.t.is_finite()) {
        return Err(LabError::Config(String::from(
            "direction components s, t must be finite and positive",
        )));
    }
    if !(cfg.mu > 0.0 && cfg.mu.is_finite()) {
        return Err(LabError::Config(String::from(
            "bulk shape mu must be finite and positive",
        )));
    }
    let big_n = cfg.n_scale as f64;
    let m = (big_n * cfg.s).floor() as usize;
    let n = (big_n * cfg.t).floor() as usize;
    if m == 0 || n == 0 || cfg.reps < 2 {
        return Err(LabError::Config(String::from(
            "bulk law of large numbers needs a nondegenerate rectangle and reps >= 2",
        )));
    }

    let (mu, seed) = (cfg.mu, cfg.seed);
    let values = collect_replicas(run_replicas(cfg.reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, r as u64);
        streaming_corner_bulk(m, n, mu, &mut rng)
    }))?;

    let free_energy = free_energy_pt(cfg.s, cfg.t, cfg.mu);
    let mut acc = McSummary::new();
    let mut tails = [0.0f64; 3];
    let band = big_n.powf(1.0 / 3.0);
    let mut csv = CsvTable::new("replica,logZ");
    for (r, &lz) in values.iter().enumerate() {
        acc.push(lz);
        let dev = (lz - big_n * free_energy).abs();
        for (t, &b) in tails.iter_mut().zip(&TAIL_BS) {
            if dev >= b * band {
                *t += 1.0;
            }
        }
        csv.rows.push(format!("{r},{lz}"));
    }
    for t in tails.iter_mut() {
        *t /= cfg.reps as f64;
    }

    let mut report = ExperimentReport::new("lln-bulk", cfg.seed);
    report.param("s", cfg.s);
    report.param("t", cfg.t);
    report.param("mu", cfg.mu);
    report.param("n_scale", cfg.n_scale as u64);
    report.param("m", m as u64);
    report.param("n", n as u64);
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("coupled_reps", COUPLED_REPS as u64);

    report.push(
        Check::band(
            "free_energy",
            "AC11",
            "mean of log Z / N sits within 0.05 of the explicit free energy",
            acc.mean() / big_n,
            free_energy - 0.05,
            free_energy + 0.05,
        )
        .with("free_energy", free_energy)
        .with("stderr", acc.stderr_mean() / big_n),
    );

    let monotone =
        tails[0] >= tails[1] && tails[1] >= tails[2] && tails[0] > tails[2];
    report.push(
        Check::flag(
            "tail_monotone",
            "AC11",
            "tail mass beyond b N^(1/3) decreases in b",
            tails[0] - tails[2],
            monotone,
        )
        .with("tail_b1", tails[0])
        .with("tail_b2", tails[1])
        .with("tail_b4", tails[2]),
    );

    let params = model_params(cfg.mu / 2.0, cfg.mu)?;
    let reps = cfg.reps;
    let coupled = collect_replicas(run_replicas(COUPLED_REPS, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, (reps + r) as u64);
        let boundary_env = build_env(m, n, params, &mut rng)?;
        let mut log_y = vec![0.0; (m + 1) * (n + 1)];
        for i in 1..=m {
            for j in 1..=n {
                log_y[i * (n + 1) + j] = boundary_env.log_y(i, j);
            }
        }
        let bulk_env = Environment::from_bulk_parts(mu, m, n, log_y)?;
        let boundary = forward_logz(&boundary_env)?;
        let bulk = bulk_logz(&bulk_env, (1, 1))?;
        Ok(boundary.corner() - boundary_env.log_u0(1) - bulk.at(m, n))
    }))?;
    let min_margin = coupled.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    report.push(Check::at_least(
        "coupled_boundary_dominates",
        "aux",
        "boundary log Z dominates the coupled bulk log Z plus the first axis weight",
        min_margin,
        -1e-12,
    ));

    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}
