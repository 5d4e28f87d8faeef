//! Gaussian fluctuations off the characteristic direction.
//!
//! Widening the characteristic rectangle by `c1 * N^alpha` columns with
//! `alpha > 2/3` pushes the exit point deep into the horizontal axis, so
//! `log Z` picks up an asymptotically normal correction of variance
//! `c1 * psi1(theta) * N^alpha`. The driver checks the rescaled sample
//! variance and normality of the standardized sample. The normality test
//! standardizes by the sample moments, since at accessible scales the
//! variance itself still carries visible finite-size drift that the
//! dedicated variance band accounts for.
//!
//! The limit sets in slowly: the non-Gaussian remainder shrinks like
//! `N^(1/3 - alpha/2)`, so at `alpha = 0.9` the standardized sample still
//! carries skewness near `0.4` at `N = 512` (stable across seeds, decaying
//! across scales at the predicted rate). A Kolmogorov-Smirnov test over
//! five thousand replicas resolves that much skew with near certainty, so
//! the normality check fails at those parameters even though the variance
//! and the exact mean identity hold. Pushing `alpha` to one, where the
//! remainder decays like `N^(-1/6)`, restores the expected pass.

use std::time::Instant;

use polymer_core::lattice::streaming_corner_boundary;
use polymer_core::specfun::{digamma, trigamma};
use polymer_core::stats::{ks_test, normal_cdf, McSummary};
use polymer_core::RngStream;

use super::{collect_replicas, ks_check, model_params, sigma_check, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, CsvTable, ExperimentReport};
use crate::LabError;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct CltConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Characteristic scale.
    pub n_scale: usize,
    /// Off-characteristic exponent, in `(2/3, 1]`.
    pub alpha: f64,
    /// Off-characteristic displacement coefficient, positive.
    pub c1: f64,
    /// Replica count.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig {
            theta: 1.0,
            mu: 2.0,
            n_scale: 512,
            alpha: 0.9,
            c1: 1.0,
            reps: 5_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Tests the off-characteristic central limit behavior of `log Z`.
pub fn run(cfg: &CltConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if !(cfg.alpha > 2.0 / 3.0 && cfg.alpha <= 1.0) {
        return Err(LabError::Config(String::from(
            "off-characteristic exponent alpha must lie in (2/3, 1]",
        )));
    }
    if !(cfg.c1 > 0.0) || cfg.n_scale == 0 || cfg.reps < 2 {
        return Err(LabError::Config(String::from(
            "off-characteristic test needs c1 > 0, n_scale >= 1, reps >= 2",
        )));
    }

    let big_n = cfg.n_scale as f64;
    let m = (trigamma(params.v_shape()) * big_n + cfg.c1 * big_n.powf(cfg.alpha)).floor() as usize;
    let n = (trigamma(params.theta()) * big_n).floor() as usize;
    if m == 0 || n == 0 {
        return Err(LabError::Config(String::from(
            "off-characteristic rectangle degenerates at this scale",
        )));
    }

    let seed = cfg.seed;
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

    let scale = big_n.powf(-cfg.alpha / 2.0);
    let rescaled_var = acc.variance() * scale * scale;
    let rescaled_stderr = acc.stderr_variance() * scale * scale;
    let target = cfg.c1 * trigamma(params.theta());

    let sd = acc.variance().sqrt();
    let standardized: Vec<f64> = values.iter().map(|&v| (v - acc.mean()) / sd).collect();
    let ks = ks_test(&standardized, normal_cdf)?;
    let skewness = acc.central3() / (acc.variance() * sd);
    let kurtosis_excess = acc.central4() / (acc.variance() * acc.variance()) - 3.0;
    let exact_mean =
        -(m as f64) * digamma(params.theta()) - (n as f64) * digamma(params.v_shape());

    let mut report = ExperimentReport::new("clt-offchar", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("n_scale", cfg.n_scale as u64);
    report.param("alpha", cfg.alpha);
    report.param("c1", cfg.c1);
    report.param("m", m as u64);
    report.param("n", n as u64);
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("p_threshold", cfg.tol.p_threshold);

    report.push(
        Check::band(
            "rescaled_variance",
            "AC10",
            "variance of N^(-alpha/2) (log Z - mean) is c1 psi1(theta) within 20 percent",
            rescaled_var,
            0.8 * target,
            1.2 * target,
        )
        .with("target", target)
        .with("stderr", rescaled_stderr),
    );
    report.push(
        ks_check(
            "normality_ks",
            "AC10",
            "standardized log Z sample is consistent with a normal law",
            &ks,
            cfg.tol.p_threshold,
        )
        .with("skewness", skewness)
        .with("kurtosis_excess", kurtosis_excess),
    );
    report.push(sigma_check(
        "mean_exact",
        "aux",
        "sample mean of log Z matches the closed form at the widened rectangle",
        acc.mean(),
        exact_mean,
        acc.stderr_mean(),
        cfg.tol.sigma_mult,
    ));

    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rescaled_variance(cfg: &CltConfig) -> f64 {
        let outcome = run(cfg).expect("clt run");
        outcome
            .report
            .checks
            .iter()
            .find(|c| c.id == "rescaled_variance")
            .expect("variance check present")
            .observed
    }

    #[test]
    fn variance_scales_linearly_in_c1() {
        let base = CltConfig {
            n_scale: 64,
            reps: 1_500,
            ..CltConfig::default()
        };
        let doubled = CltConfig { c1: 2.0, ..base.clone() };
        let ratio = rescaled_variance(&doubled) / rescaled_variance(&base);
        assert!(
            (1.7..2.3).contains(&ratio),
            "doubling c1 scaled the variance by {ratio}"
        );
    }

    #[test]
    fn rejects_alpha_outside_range() {
        let cfg = CltConfig {
            alpha: 0.5,
            ..CltConfig::default()
        };
        assert!(matches!(run(&cfg), Err(crate::LabError::Config(_))));
    }
}
