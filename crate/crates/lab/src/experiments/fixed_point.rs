//! Distributional fixed point of the local weight update map.
//!
//! The map sends an independent triple `(U, V, Y)` with gamma reciprocal
//! marginals to `U' = Y(1 + U/V)`, `V' = Y(1 + V/U)`,
//! `Y' = (1/U + 1/V)^{-1}`, and leaves the joint law invariant. The driver
//! draws in batches, records the first four raw log-moments of both triples
//! per batch, and tests the paired per-batch differences against zero, so
//! the strong correlation between a batch's primed and unprimed moments
//! cancels instead of inflating the error bars.

use std::time::Instant;

use polymer_core::lattice::log_add_exp;
use polymer_core::specfun::digamma;
use polymer_core::stats::McSummary;
use polymer_core::RngStream;

use super::{collect_replicas, model_params, sigma_check, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, ExperimentReport};
use crate::LabError;

const BATCHES: usize = 100;
const VARS: [&str; 3] = ["u", "v", "y"];

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct FixedPointConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Total draw count, split into 100 equal batches.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            theta: 1.0,
            mu: 2.0,
            reps: 1_000_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

struct Batch {
    prime: [[f64; 4]; 3],
    base: [[f64; 4]; 3],
    corr: [f64; 5],
}

fn log_triple_update(lu: f64, lv: f64, ly: f64) -> (f64, f64, f64) {
    (
        ly + log_add_exp(0.0, lu - lv),
        ly + log_add_exp(0.0, lv - lu),
        -log_add_exp(-lu, -lv),
    )
}

fn push_powers(sums: &mut [f64; 4], x: f64) {
    let mut p = 1.0;
    for s in sums.iter_mut() {
        p *= x;
        *s += p;
    }
}

/// Compares the first four log-moments of the updated triple against the
/// original triple over batched draws.
pub fn run(cfg: &FixedPointConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if cfg.reps < 100_000 {
        return Err(LabError::Config(String::from(
            "fixed point experiment needs at least 10^5 draws",
        )));
    }
    let batch_size = cfg.reps / BATCHES;
    let total = batch_size * BATCHES;

    let seed = cfg.seed;
    let batches = collect_replicas(run_replicas(BATCHES, cfg.workers, move |b| {
        let mut rng = RngStream::new(seed, b as u64);
        let mut prime = [[0.0f64; 4]; 3];
        let mut base = [[0.0f64; 4]; 3];
        let mut corr = [0.0f64; 5];
        for _ in 0..batch_size {
            let lu = -rng.sample_gamma(params.theta()).ln();
            let lv = -rng.sample_gamma(params.v_shape()).ln();
            let ly = -rng.sample_gamma(params.mu()).ln();
            let (lu2, lv2, ly2) = log_triple_update(lu, lv, ly);
            for (sums, x) in base.iter_mut().zip([lu, lv, ly]) {
                push_powers(sums, x);
            }
            for (sums, x) in prime.iter_mut().zip([lu2, lv2, ly2]) {
                push_powers(sums, x);
            }
            corr[0] += lu2;
            corr[1] += ly2;
            corr[2] += lu2 * ly2;
            corr[3] += lu2 * lu2;
            corr[4] += ly2 * ly2;
        }
        let scale = 1.0 / batch_size as f64;
        for sums in prime.iter_mut().chain(base.iter_mut()) {
            for s in sums.iter_mut() {
                *s *= scale;
            }
        }
        Ok(Batch { prime, base, corr })
    }))?;

    let mut report = ExperimentReport::new("fixed-point", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("reps", total as u64);
    report.param("batches", BATCHES as u64);
    report.param("workers", cfg.workers as u64);
    report.param("sigma_mult", cfg.tol.sigma_mult);

    let (p2, v2, y2) = log_triple_update(0.0, 0.0, 0.0);
    let probe = (p2 - core::f64::consts::LN_2)
        .abs()
        .max((v2 - core::f64::consts::LN_2).abs())
        .max((y2 + core::f64::consts::LN_2).abs());
    report.push(Check::at_most(
        "unit_probe",
        "aux",
        "update of the deterministic triple (1, 1, 1) equals (2, 2, 1/2)",
        probe,
        1e-15,
    ));

    for (v, name) in VARS.iter().enumerate() {
        for p in 0..4 {
            let mut diff = McSummary::new();
            for b in &batches {
                diff.push(b.prime[v][p] - b.base[v][p]);
            }
            report.push(sigma_check(
                &format!("{name}_moment{}", p + 1),
                "AC4",
                &format!(
                    "batch-paired difference of the order-{} raw log {} moment vanishes",
                    p + 1,
                    name
                ),
                diff.mean(),
                0.0,
                diff.stderr_mean(),
                cfg.tol.sigma_mult,
            ));
        }
    }

    let mut u_prime_mean = McSummary::new();
    for b in &batches {
        u_prime_mean.push(b.prime[0][0]);
    }
    report.push(sigma_check(
        "u_prime_mean",
        "aux",
        "mean of the updated log u matches the digamma target",
        u_prime_mean.mean(),
        -digamma(params.theta()),
        u_prime_mean.stderr_mean(),
        cfg.tol.sigma_mult,
    ));

    let n = total as f64;
    let (sx, sy, sxy, sxx, syy) = batches.iter().fold((0.0, 0.0, 0.0, 0.0, 0.0), |a, b| {
        (
            a.0 + b.corr[0],
            a.1 + b.corr[1],
            a.2 + b.corr[2],
            a.3 + b.corr[3],
            a.4 + b.corr[4],
        )
    });
    let corr = (sxy - sx * sy / n) / ((sxx - sx * sx / n) * (syy - sy * sy / n)).sqrt();
    report.push(Check::at_most(
        "u_y_prime_correlation",
        "aux",
        "updated log u and log y stay uncorrelated",
        corr.abs(),
        cfg.tol.sigma_mult / n.sqrt(),
    ));

    report.finish(start);
    Ok(ExperimentOutcome { report, csv: None })
}
