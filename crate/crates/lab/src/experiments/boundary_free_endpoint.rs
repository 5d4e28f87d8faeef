//! Free-endpoint boundary polymer on the anti-diagonal.
//!
//! Away from the symmetric point the total partition function is dominated
//! by one axis corner, so `N^{-1/2}(log Z_tot - N g)` is asymptotically
//! normal with variance `psi1(min(theta, mu - theta))`. At the symmetric
//! point `theta = mu / 2` both axes compete and the limit is the scaled
//! larger of two running maxima of independent Brownian motions, sampled
//! here by reflection as `sqrt(psi1(mu / 2)) * max(|Z_1|, |Z_2|)` with
//! standard normal `Z_i`.

use std::time::Instant;

use polymer_core::lattice::{log_sum_exp, streaming_antidiagonal_boundary};
use polymer_core::specfun::{boundary_endpoint_free_energy, boundary_endpoint_variance, trigamma};
use polymer_core::stats::{ks_test, normal_cdf, two_sample_ks, McSummary};
use polymer_core::RngStream;

use super::{collect_replicas, ks_check, model_params, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, CsvTable, ExperimentReport};
use crate::LabError;

/// Reference draws behind the symmetric-point mean target.
const REFERENCE_MEAN_DRAWS: usize = 1_000_000;
/// Leading reference draws entering the two-sample comparison.
const REFERENCE_KS_DRAWS: usize = 200_000;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct BoundaryFreeEndpointConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Anti-diagonal scale.
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

impl Default for BoundaryFreeEndpointConfig {
    fn default() -> Self {
        BoundaryFreeEndpointConfig {
            theta: 0.6,
            mu: 2.0,
            n_scale: 512,
            reps: 3_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Tests the fluctuation law of the free-endpoint boundary total.
pub fn run(cfg: &BoundaryFreeEndpointConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if cfg.n_scale == 0 || cfg.reps < 2 {
        return Err(LabError::Config(String::from(
            "boundary free endpoint needs n_scale >= 1 and reps >= 2",
        )));
    }

    let big_n = cfg.n_scale as f64;
    let g = boundary_endpoint_free_energy(cfg.theta, cfg.mu);
    let (scale, seed) = (cfg.n_scale, cfg.seed);
    let rows = collect_replicas(run_replicas(cfg.reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, r as u64);
        let lzs = streaming_antidiagonal_boundary(scale, params, &mut rng)?;
        Ok(log_sum_exp(&lzs))
    }))?;

    let mut csv = CsvTable::new("replica,logZtot");
    let mut acc = McSummary::new();
    let mut sample = Vec::with_capacity(cfg.reps);
    for (r, &lz) in rows.iter().enumerate() {
        csv.rows.push(format!("{r},{lz}"));
        let x = (lz - big_n * g) / big_n.sqrt();
        acc.push(x);
        sample.push(x);
    }

    let mut report = ExperimentReport::new("boundary-free-endpoint", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("n_scale", cfg.n_scale as u64);
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("p_threshold", cfg.tol.p_threshold);
    report.param("free_energy", g);

    let symmetric = (cfg.theta - cfg.mu / 2.0).abs() <= 1e-9 * cfg.mu;
    report.param("symmetric_point", symmetric);
    if symmetric {
        let sigma = trigamma(cfg.mu / 2.0).sqrt();
        let mut ref_rng = RngStream::new(cfg.seed, cfg.reps as u64);
        let mut ref_mean = 0.0;
        let mut ref_sample = Vec::with_capacity(REFERENCE_KS_DRAWS);
        for i in 0..REFERENCE_MEAN_DRAWS {
            let z1 = ref_rng.standard_normal().abs();
            let z2 = ref_rng.standard_normal().abs();
            let w = sigma * z1.max(z2);
            ref_mean += w;
            if i < REFERENCE_KS_DRAWS {
                ref_sample.push(w);
            }
        }
        ref_mean /= REFERENCE_MEAN_DRAWS as f64;

        let ks = two_sample_ks(&sample, &ref_sample)?;
        report.push(ks_check(
            "symmetric_limit_ks",
            "AC13",
            "rescaled log Z_tot matches the simulated two-sided Brownian max law",
            &ks,
            cfg.tol.p_threshold,
        ));
        report.push(
            Check::band(
                "symmetric_limit_mean",
                "aux",
                "rescaled mean sits within 15 percent of the reference mean",
                acc.mean(),
                0.85 * ref_mean,
                1.15 * ref_mean,
            )
            .with("reference_mean", ref_mean)
            .with("stderr", acc.stderr_mean()),
        );
    } else {
        let sigma = boundary_endpoint_variance(cfg.theta, cfg.mu).sqrt();
        let ks = ks_test(&sample, |x| normal_cdf(x / sigma))?;
        report.push(
            ks_check(
                "corner_normal_ks",
                "AC13",
                "rescaled log Z_tot matches the dominant-corner normal law",
                &ks,
                cfg.tol.p_threshold,
            )
            .with("sigma", sigma),
        );
    }

    if cfg.mu / 2.0 > 0.02 {
        let probe = (boundary_endpoint_free_energy(cfg.mu / 2.0 - 0.01, cfg.mu)
            - boundary_endpoint_free_energy(cfg.mu / 2.0 + 0.01, cfg.mu))
        .abs();
        report.push(Check::at_most(
            "free_energy_symmetry_probe",
            "aux",
            "limit free energy is symmetric about mu / 2",
            probe,
            1e-2,
        ));
    }

    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}
