//! Stationarity of ratio and dual weights along a down-right path.
//!
//! On a square boundary lattice, a staircase path through the center
//! carries one `U` ratio per east step and one `V` ratio per south step;
//! dual `X` weights sit at lattice points whose diagonal translate meets
//! the path. All of these are mutually independent with the same gamma
//! reciprocal marginals as the original weight families, so the driver
//! checks pooled means and variances per family, the exact marginal law of
//! the `U` family, and the full pairwise correlation matrix.

use std::time::Instant;

use polymer_core::lattice::{forward_logz, log_add_exp, ratio_fields};
use polymer_core::randenv::build_env;
use polymer_core::specfun::{digamma, trigamma};
use polymer_core::stats::{gamma_p, ks_test, CovAccum, McSummary};
use polymer_core::RngStream;

use super::{collect_replicas, ks_check, model_params, sigma_check, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, ExperimentReport};
use crate::LabError;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct BurkeConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Square lattice side, at least 8.
    pub size: usize,
    /// Replica count.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for BurkeConfig {
    fn default() -> Self {
        BurkeConfig {
            theta: 0.8,
            mu: 2.0,
            size: 30,
            reps: 20_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Staircase geometry on a square of side `m`: start at `(s, m - s)` with
/// `s = m / 3`, alternate east and south steps down to `(m - s, s)`.
struct Staircase {
    s: usize,
    steps: usize,
    diag: usize,
}

impl Staircase {
    fn new(m: usize) -> Self {
        let s = m / 3;
        let steps = m - 2 * s;
        Staircase {
            s,
            steps,
            diag: steps.min(5),
        }
    }

    fn var_count(&self) -> usize {
        2 * self.steps + 1 + self.diag
    }
}

/// Checks independence and marginals of the staircase variables over
/// `reps` environments.
pub fn run(cfg: &BurkeConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if cfg.size < 8 {
        return Err(LabError::Config(String::from(
            "staircase experiment needs a square side of at least 8",
        )));
    }
    if cfg.reps < 10_000 {
        return Err(LabError::Config(String::from(
            "staircase experiment needs at least 10^4 replicas",
        )));
    }

    let (m, seed) = (cfg.size, cfg.seed);
    let stair = Staircase::new(m);
    let rows = collect_replicas(run_replicas(cfg.reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, r as u64);
        let env = build_env(m, m, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let ratios = ratio_fields(&lat);
        let stair = Staircase::new(m);
        let mut vals = Vec::with_capacity(stair.var_count());
        for k in 0..stair.steps {
            vals.push(ratios.log_u(stair.s + 1 + k, m - stair.s - k));
        }
        for k in 0..stair.steps {
            vals.push(ratios.log_v(stair.s + 1 + k, m - stair.s - k));
        }
        vals.push(-log_add_exp(-ratios.log_u(1, 0), -ratios.log_v(0, 1)));
        for i in 0..stair.diag {
            let (pi, pj) = (stair.s + i, m - stair.s - 1 - i);
            vals.push(-log_add_exp(
                -ratios.log_u(pi + 1, pj),
                -ratios.log_v(pi, pj + 1),
            ));
        }
        Ok(vals)
    }))?;

    let nvars = stair.var_count();
    let mut family = [McSummary::new(), McSummary::new(), McSummary::new()];
    let mut u_pool = Vec::with_capacity(stair.steps * cfg.reps);
    let mut pairs = vec![CovAccum::new(); nvars * (nvars - 1) / 2];
    for row in &rows {
        for (k, &v) in row.iter().enumerate() {
            let fam = if k < stair.steps {
                0
            } else if k < 2 * stair.steps {
                1
            } else {
                2
            };
            family[fam].push(v);
            if fam == 0 {
                u_pool.push(v);
            }
        }
        let mut p = 0;
        for a in 0..nvars {
            for b in (a + 1)..nvars {
                pairs[p].push(row[a], row[b]);
                p += 1;
            }
        }
    }

    let theta = params.theta();
    let vsh = params.v_shape();
    let mu = params.mu();
    let targets = [
        ("u", -digamma(theta), trigamma(theta)),
        ("v", -digamma(vsh), trigamma(vsh)),
        ("x", -digamma(mu), trigamma(mu)),
    ];

    let mut report = ExperimentReport::new("burke", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("size", m as u64);
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("sigma_mult", cfg.tol.sigma_mult);
    report.param("p_threshold", cfg.tol.p_threshold);
    report.param("staircase_vars", nvars as u64);

    for ((name, mean_t, var_t), acc) in targets.iter().zip(&family) {
        report.push(sigma_check(
            &format!("{name}_log_mean"),
            "AC3",
            &format!("pooled mean of log {name} values matches the digamma target"),
            acc.mean(),
            *mean_t,
            acc.stderr_mean(),
            cfg.tol.sigma_mult,
        ));
        report.push(sigma_check(
            &format!("{name}_log_var"),
            "AC3",
            &format!("pooled variance of log {name} values matches the trigamma target"),
            acc.variance(),
            *var_t,
            acc.stderr_variance(),
            cfg.tol.sigma_mult,
        ));
    }

    let mut max_corr = 0.0f64;
    for pair in &pairs {
        max_corr = max_corr.max(pair.correlation().abs());
    }
    let corr_cap = cfg.tol.sigma_mult / (cfg.reps as f64).sqrt();
    report.push(
        Check::at_most(
            "max_abs_correlation",
            "AC3",
            "largest pairwise correlation among the staircase variables",
            max_corr,
            corr_cap,
        )
        .with("pairs", pairs.len() as f64),
    );

    let ks = ks_test(&u_pool, |t| 1.0 - gamma_p(theta, (-t).exp()))?;
    report.push(ks_check(
        "u_marginal_ks",
        "aux",
        "pooled log U sample follows the exact gamma reciprocal law",
        &ks,
        cfg.tol.p_threshold,
    ));

    report.finish(start);
    Ok(ExperimentOutcome { report, csv: None })
}
