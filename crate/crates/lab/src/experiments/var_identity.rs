//! Exact variance identity for `log Z` on characteristic rectangles.
//!
//! The variance of `log Z_{m,n}` equals
//! `n psi1(mu - theta) - m psi1(theta)` plus twice the annealed mean of the
//! exit kernel sum along the horizontal axis, and symmetrically with the
//! sign flipped for the vertical axis. Both right-hand sides are estimated
//! from the same replicas as the sample variance, and the two must also
//! agree with each other, which this driver checks through the paired
//! per-replica difference of the two kernel sums.

use std::time::Instant;

use polymer_core::lattice::{forward_logz, reverse_logw};
use polymer_core::polymer::{exit_distribution, exit_phi_expectation, Axis};
use polymer_core::randenv::build_env;
use polymer_core::specfun::{char_rectangle, phi, trigamma};
use polymer_core::stats::McSummary;
use polymer_core::{Environment, RngStream};

use super::{collect_replicas, model_params, sigma_check, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{CsvTable, ExperimentReport};
use crate::LabError;

const DEGENERATE_REPS: usize = 5_000;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct VarIdentityConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Characteristic scale.
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

impl Default for VarIdentityConfig {
    fn default() -> Self {
        VarIdentityConfig {
            theta: 0.9,
            mu: 2.0,
            n_scale: 64,
            reps: 20_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Estimates both sides of the variance identity and their internal
/// consistency.
pub fn run(cfg: &VarIdentityConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if cfg.n_scale == 0 || cfg.reps < 10_000 {
        return Err(LabError::Config(String::from(
            "variance identity experiment needs n_scale >= 1 and reps >= 10^4",
        )));
    }
    let shape = char_rectangle(cfg.n_scale as f64, params);
    let (m, n) = (shape.m, shape.n);

    let seed = cfg.seed;
    let rows = collect_replicas(run_replicas(cfg.reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, r as u64);
        let env = build_env(m, n, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let rev = reverse_logw(&env, (m, n))?;
        let exd = exit_distribution(&env, &lat, &rev)?;
        let phi_x = exit_phi_expectation(&env, &exd, Axis::Horizontal)?;
        let phi_y = exit_phi_expectation(&env, &exd, Axis::Vertical)?;
        Ok((lat.corner(), phi_x, phi_y))
    }))?;

    let mut logz = McSummary::new();
    let mut phix = McSummary::new();
    let mut phiy = McSummary::new();
    let mut phid = McSummary::new();
    let mut csv = CsvTable::new("replica,logZ,phi_x,phi_y");
    for (r, &(lz, px, py)) in rows.iter().enumerate() {
        logz.push(lz);
        phix.push(px);
        phiy.push(py);
        phid.push(px - py);
        csv.rows.push(format!("{r},{lz},{px},{py}"));
    }

    let deterministic = n as f64 * trigamma(params.v_shape()) - m as f64 * trigamma(params.theta());
    let lhs = logz.variance();
    let se_lhs = logz.stderr_variance();
    let rhs1 = deterministic + 2.0 * phix.mean();
    let se_rhs1 = 2.0 * phix.stderr_mean();
    let rhs2 = -deterministic + 2.0 * phiy.mean();
    let se_rhs2 = 2.0 * phiy.stderr_mean();
    let consistency = 2.0 * deterministic + 2.0 * phid.mean();
    let se_cons = 2.0 * phid.stderr_mean();

    let mut report = ExperimentReport::new("var-identity", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("n_scale", cfg.n_scale as u64);
    report.param("m", m as u64);
    report.param("n", n as u64);
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("sigma_mult", cfg.tol.sigma_mult);

    report.push(
        sigma_check(
            "lhs_vs_rhs_x",
            "AC5",
            "sample variance of log Z matches the horizontal exit kernel identity",
            lhs - rhs1,
            0.0,
            (se_lhs * se_lhs + se_rhs1 * se_rhs1).sqrt(),
            cfg.tol.sigma_mult,
        )
        .with("lhs", lhs)
        .with("rhs", rhs1),
    );
    report.push(
        sigma_check(
            "lhs_vs_rhs_y",
            "AC5",
            "sample variance of log Z matches the vertical exit kernel identity",
            lhs - rhs2,
            0.0,
            (se_lhs * se_lhs + se_rhs2 * se_rhs2).sqrt(),
            cfg.tol.sigma_mult,
        )
        .with("lhs", lhs)
        .with("rhs", rhs2),
    );
    report.push(
        sigma_check(
            "rhs_consistency",
            "aux",
            "the two right-hand sides agree through the paired kernel difference",
            consistency,
            0.0,
            se_cons,
            cfg.tol.sigma_mult,
        )
        .with("deterministic_part", deterministic),
    );

    push_degenerate_rows(&mut report, params, cfg)?;

    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}

/// On the single-cell row `m = 1, n = 0` the path is forced, `log Z` is the
/// lone axis weight, and both sides of the identity collapse to
/// `psi1(theta)`.
fn push_degenerate_rows(
    report: &mut ExperimentReport,
    params: polymer_core::ModelParams,
    cfg: &VarIdentityConfig,
) -> Result<(), LabError> {
    let mut logu = McSummary::new();
    let mut phis = McSummary::new();
    let mut rng = RngStream::new(cfg.seed, cfg.reps as u64);
    for _ in 0..DEGENERATE_REPS {
        let g = rng.sample_gamma(params.theta());
        let lu = -g.ln();
        let env = Environment::from_boundary_parts(
            params,
            1,
            0,
            vec![0.0, lu],
            vec![0.0],
            vec![0.0, 0.0],
        )?;
        let lat = forward_logz(&env)?;
        let rev = reverse_logw(&env, (1, 0))?;
        let exd = exit_distribution(&env, &lat, &rev)?;
        let val = exit_phi_expectation(&env, &exd, Axis::Horizontal)?;
        debug_assert!((val - phi(params.theta(), g)).abs() < 1e-12);
        logu.push(lu);
        phis.push(val);
    }
    let target = trigamma(params.theta());
    report.push(sigma_check(
        "degenerate_row_lhs",
        "aux",
        "variance of log Z on the forced single-step row equals psi1(theta)",
        logu.variance(),
        target,
        logu.stderr_variance(),
        cfg.tol.sigma_mult,
    ));
    report.push(sigma_check(
        "degenerate_row_rhs",
        "aux",
        "exit kernel identity on the forced single-step row recovers psi1(theta)",
        -target + 2.0 * phis.mean(),
        target,
        2.0 * phis.stderr_mean(),
        cfg.tol.sigma_mult,
    ));
    report.param("degenerate_reps", DEGENERATE_REPS as u64);
    Ok(())
}
