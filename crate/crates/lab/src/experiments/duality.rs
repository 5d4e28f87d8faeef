//! Reversal duality of the boundary polymer.
//!
//! Reversing a rectangle turns the partition-function field into the star
//! field `Z*_{i,j} = Z_{m,n} / Z_{m-i,n-j}`, whose induced weight system is
//! again a boundary polymer with the same parameter. The driver verifies
//! the deterministic identities per environment, then compares the law of
//! the dual-kernel exit tails on one environment ensemble against the law
//! of the reversed exit tails on an independent ensemble, and closes with
//! the beta law of the last-step probability.

use std::time::Instant;

use polymer_core::lattice::{
    dual_weights, forward_logz, star_environment, star_lattice, LogZLattice,
};
use polymer_core::polymer::{
    dual_exit_x_tail, last_step_probability, reversed_exit_x_tail,
};
use polymer_core::randenv::build_env;
use polymer_core::specfun::digamma;
use polymer_core::stats::{beta_cdf, ks_test, two_sample_ks, McSummary};
use polymer_core::RngStream;

use super::{collect_replicas, ks_check, model_params, sigma_check, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, ExperimentReport};
use crate::LabError;

/// Exit depths entering the law comparison.
const TAIL_KS: [usize; 3] = [1, 2, 5];
/// Environments entering the deterministic battery.
const BATTERY_REPS: usize = 100;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct DualityConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Rectangle width, at least 5.
    pub m: usize,
    /// Rectangle height, at least 1.
    pub n: usize,
    /// Replica count per ensemble.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for DualityConfig {
    fn default() -> Self {
        DualityConfig {
            theta: 0.8,
            mu: 2.0,
            m: 16,
            n: 12,
            reps: 2_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

fn max_cell_diff(a: &LogZLattice, b: &LogZLattice) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..=a.m() {
        for j in 0..=a.n() {
            worst = worst.max((a.at(i, j) - b.at(i, j)).abs());
        }
    }
    worst
}

/// Verifies the reversal identities and the distributional duality of exit
/// tails.
pub fn run(cfg: &DualityConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    let max_k = TAIL_KS[TAIL_KS.len() - 1];
    if cfg.m < max_k || cfg.n == 0 {
        return Err(LabError::Config(format!(
            "duality rectangle needs m >= {max_k} and n >= 1"
        )));
    }
    if cfg.reps < 2_000 {
        return Err(LabError::Config(String::from(
            "duality experiment needs at least 2 * 10^3 replicas per ensemble",
        )));
    }

    let (m, n, seed, reps) = (cfg.m, cfg.n, cfg.seed, cfg.reps);
    let star_tails = collect_replicas(run_replicas(reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, r as u64);
        let env = build_env(m, n, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let dual = dual_weights(&lat, &env)?;
        let mut out = [0.0f64; 4];
        for (slot, &k) in out.iter_mut().zip(&TAIL_KS) {
            *slot = dual_exit_x_tail(&dual, &lat, k)?;
        }
        out[3] = last_step_probability(&lat)?;
        Ok(out)
    }))?;
    let reversed_tails = collect_replicas(run_replicas(reps, cfg.workers, move |r| {
        let mut rng = RngStream::new(seed, (reps + r) as u64);
        let env = build_env(m, n, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let mut out = [0.0f64; 3];
        for (slot, &k) in out.iter_mut().zip(&TAIL_KS) {
            *slot = reversed_exit_x_tail(&lat, &env, k)?;
        }
        Ok(out)
    }))?;

    let mut involution = 0.0f64;
    let mut corner = 0.0f64;
    let mut star_forward = 0.0f64;
    let mut pointwise = 0.0f64;
    let mut last_step_link = 0.0f64;
    let mut u_star = McSummary::new();
    for r in 0..BATTERY_REPS {
        let mut rng = RngStream::new(seed, r as u64);
        let env = build_env(m, n, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let star = star_lattice(&lat)?;
        involution = involution.max(max_cell_diff(&star_lattice(&star)?, &lat));
        corner = corner.max((star.at(m, n) - lat.at(m, n)).abs());

        let star_env = star_environment(&env, &lat)?;
        star_forward = star_forward.max(max_cell_diff(&forward_logz(&star_env)?, &star));
        let dual = dual_weights(&lat, &env)?;
        for &k in &TAIL_KS {
            let via_dual = dual_exit_x_tail(&dual, &lat, k)?;
            let via_reversal = reversed_exit_x_tail(&star, &star_env, k)?;
            pointwise = pointwise.max((via_dual - via_reversal).abs());
        }
        last_step_link = last_step_link
            .max((reversed_exit_x_tail(&lat, &env, 1)? - last_step_probability(&lat)?).abs());
        for i in 1..=m {
            u_star.push(star_env.log_u0(i));
        }
    }

    let mut report = ExperimentReport::new("duality", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("m", m as u64);
    report.param("n", n as u64);
    report.param("reps", reps as u64);
    report.param("workers", cfg.workers as u64);
    report.param("battery_reps", BATTERY_REPS as u64);
    report.param("p_threshold", cfg.tol.p_threshold);

    report.push(Check::at_most(
        "reversal_involution",
        "AC9",
        "reversing the star lattice recovers the original lattice",
        involution,
        1e-10,
    ));
    report.push(Check::at_most(
        "reversal_corner",
        "AC9",
        "star and original lattices share the corner value exactly",
        corner,
        0.0,
    ));
    report.push(Check::at_most(
        "star_environment_forward",
        "AC9",
        "forward pass of the star environment rebuilds the star lattice",
        star_forward,
        1e-10,
    ));
    report.push(Check::at_most(
        "dual_tail_reversal",
        "AC9",
        "dual-kernel exit tails equal the reversed exit tails of the star system",
        pointwise,
        1e-10,
    ));
    report.push(Check::at_most(
        "last_step_link",
        "aux",
        "depth-one reversed exit tail equals the last-step probability",
        last_step_link,
        1e-12,
    ));

    for (idx, &k) in TAIL_KS.iter().enumerate() {
        let a: Vec<f64> = star_tails.iter().map(|t| t[idx]).collect();
        let b: Vec<f64> = reversed_tails.iter().map(|t| t[idx]).collect();
        let ks = two_sample_ks(&a, &b)?;
        report.push(ks_check(
            &format!("tail_law_k{k}"),
            "AC9",
            "dual exit tail and reversed exit tail share a law across ensembles",
            &ks,
            cfg.tol.p_threshold,
        ));
    }

    let last_steps: Vec<f64> = star_tails.iter().map(|t| t[3]).collect();
    let ks = ks_test(&last_steps, |x| {
        beta_cdf(x, params.theta(), params.v_shape())
    })?;
    report.push(ks_check(
        "last_step_beta_ks",
        "AC8",
        "last-step probability follows the beta law of the boundary shapes",
        &ks,
        cfg.tol.p_threshold,
    ));

    report.push(sigma_check(
        "u_star_marginal",
        "aux",
        "star axis weights have the original digamma log-mean",
        u_star.mean(),
        -digamma(params.theta()),
        u_star.stderr_mean(),
        cfg.tol.sigma_mult,
    ));

    report.finish(start);
    Ok(ExperimentOutcome { report, csv: None })
}
