//! Fluctuation exponent of `log Z` along characteristic rectangles.
//!
//! The variance of `log Z` on the characteristic rectangle of scale `N`
//! grows like `N^{2/3}`. The driver estimates the variance at a geometric
//! ladder of scales with a replica budget that shrinks as the rectangles
//! grow, fits the log-log slope, and checks the boundedness of the
//! compensated ratio.

use std::time::Instant;

use polymer_core::lattice::streaming_corner_boundary;
use polymer_core::specfun::char_rectangle;
use polymer_core::stats::{ols_slope, McSummary};
use polymer_core::RngStream;

use super::{collect_replicas, model_params, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, CsvTable, ExperimentReport};
use crate::LabError;

/// Exponent the replica budget decays with as scales grow.
const REPS_DECAY: f64 = 0.58;
/// Smallest replica budget at any scale.
const REPS_FLOOR: usize = 1_000;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct ChiConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Characteristic scales, strictly increasing, at least 4.
    pub n_list: Vec<usize>,
    /// Replica count at the smallest scale.
    pub reps: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for ChiConfig {
    fn default() -> Self {
        ChiConfig {
            theta: 1.0,
            mu: 2.0,
            n_list: vec![64, 128, 256, 512, 1024],
            reps: 5_000,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

/// Replica budget at scale `n` when the smallest scale `n0` gets `base`.
fn reps_at_scale(base: usize, n0: usize, n: usize) -> usize {
    let scaled = base as f64 * (n0 as f64 / n as f64).powf(REPS_DECAY);
    (scaled.round() as usize).clamp(REPS_FLOOR, base.max(REPS_FLOOR))
}

/// Fits the growth exponent of `Var[log Z]` over the scale ladder.
pub fn run(cfg: &ChiConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if cfg.n_list.len() < 4 || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Config(String::from(
            "exponent fit needs at least 4 strictly increasing scales",
        )));
    }
    if cfg.n_list[0] == 0 || cfg.reps < 2 {
        return Err(LabError::Config(String::from(
            "exponent fit needs positive scales and reps >= 2",
        )));
    }

    let n0 = cfg.n_list[0];
    let mut stream_base = 0u64;
    let mut variances = Vec::with_capacity(cfg.n_list.len());
    let mut csv = CsvTable::new("N,var_logZ,stderr");
    let seed = cfg.seed;
    for &scale in &cfg.n_list {
        let shape = char_rectangle(scale as f64, params);
        let (m, n) = (shape.m, shape.n);
        let reps = reps_at_scale(cfg.reps, n0, scale);
        let base = stream_base;
        let values = collect_replicas(run_replicas(reps, cfg.workers, move |r| {
            let mut rng = RngStream::new(seed, base + r as u64);
            streaming_corner_boundary(m, n, params, &mut rng)
        }))?;
        stream_base += reps as u64;

        let mut acc = McSummary::new();
        for &v in &values {
            acc.push(v);
        }
        csv.rows
            .push(format!("{scale},{},{}", acc.variance(), acc.stderr_variance()));
        variances.push((scale, reps, acc.variance(), acc.stderr_variance()));
        eprintln!(
            "chi: N={scale} reps={reps} var={:.4} (+/- {:.4})",
            acc.variance(),
            acc.stderr_variance()
        );
    }

    let xs: Vec<f64> = variances.iter().map(|&(s, ..)| (s as f64).ln()).collect();
    let ys: Vec<f64> = variances.iter().map(|&(_, _, v, _)| v.ln()).collect();
    let fit = ols_slope(&xs, &ys)?;

    let mut report = ExperimentReport::new("chi", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param(
        "n_list",
        cfg.n_list.iter().map(|&v| v as u64).collect::<Vec<u64>>(),
    );
    report.param("reps", cfg.reps as u64);
    report.param("workers", cfg.workers as u64);

    report.push(
        Check::band(
            "var_slope",
            "AC6",
            "log-log slope of Var[log Z] against the scale is 2/3 within 0.1",
            fit.slope,
            2.0 / 3.0 - 0.1,
            2.0 / 3.0 + 0.1,
        )
        .with("slope_stderr", fit.slope_stderr)
        .with("intercept", fit.intercept),
    );

    let increasing = variances.windows(2).all(|w| w[0].2 < w[1].2);
    let min_var = variances
        .iter()
        .map(|&(_, _, v, _)| v)
        .fold(f64::INFINITY, f64::min);
    report.push(Check::flag(
        "var_positive_increasing",
        "aux",
        "variances are positive and increase with the scale",
        min_var,
        min_var > 0.0 && increasing,
    ));

    let ratios: Vec<f64> = variances
        .iter()
        .map(|&(s, _, v, _)| v / (s as f64).powf(2.0 / 3.0))
        .collect();
    let spread = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        / ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    report.push(Check::at_most(
        "compensated_ratio_spread",
        "aux",
        "Var[log Z] / N^(2/3) stays within a factor 3 band across scales",
        spread,
        3.0,
    ));

    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}
