//! Transversal exponent of the annealed crossing position.
//!
//! At height fraction `tau` of the characteristic rectangle, the exact
//! quenched crossing law of each environment is averaged into the annealed
//! law of the crossing column. Its spread about the characteristic column
//! `tau * m` grows like `N^{2/3}`, and its tails beyond `b * N^{2/3}`
//! shrink as `b` grows.

use std::time::Instant;

use polymer_core::lattice::{forward_logz, reverse_logw};
use polymer_core::polymer::crossing_distribution;
use polymer_core::randenv::build_env;
use polymer_core::specfun::char_rectangle;
use polymer_core::stats::{ols_slope, McSummary};
use polymer_core::RngStream;

use super::{collect_replicas, model_params, ExperimentOutcome, Tolerances};
use crate::parallel::run_replicas;
use crate::report::{Check, CsvTable, ExperimentReport};
use crate::LabError;

/// Exponent the replica budget decays with as scales grow.
const REPS_DECAY: f64 = 0.5;
/// Smallest replica budget at any scale.
const REPS_FLOOR: usize = 500;
/// Tail thresholds in units of `N^{2/3}`.
const TAIL_BS: [f64; 3] = [1.0, 2.0, 4.0];
/// Allowed relative offset of the crossing mean from the characteristic
/// column. The offset itself shrinks like `N^{-2/3}` but sits well above
/// sampling error at small scales, so the band is relative, not sigma-based.
const CENTER_REL_TOL: f64 = 0.15;

/// Configuration for [`run`].
#[derive(Debug, Clone)]
pub struct ZetaConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Characteristic scales, strictly increasing, at least 3.
    pub n_list: Vec<usize>,
    /// Replica count at the smallest scale.
    pub reps: usize,
    /// Crossing height as a fraction of the rectangle height.
    pub tau: f64,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub workers: usize,
    /// Pass thresholds.
    pub tol: Tolerances,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        ZetaConfig {
            theta: 1.0,
            mu: 2.0,
            n_list: vec![64, 128, 256, 512],
            reps: 2_000,
            tau: 0.5,
            seed: crate::config::DEFAULT_SEED,
            workers: 1,
            tol: Tolerances::default(),
        }
    }
}

fn scale_reps(base: usize, n0: usize, n: usize) -> usize {
    let scaled = base as f64 * (n0 as f64 / n as f64).powf(REPS_DECAY);
    (scaled.round() as usize).clamp(REPS_FLOOR, base.max(REPS_FLOOR))
}

struct ScaleStats {
    scale: usize,
    sd: f64,
    mean: McSummary,
    center: f64,
    tails: [f64; 3],
}

/// Fits the growth exponent of the annealed crossing spread.
pub fn run(cfg: &ZetaConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;
    if !(cfg.tau > 0.0 && cfg.tau < 1.0) {
        return Err(LabError::Config(String::from(
            "crossing fraction tau must lie strictly between 0 and 1",
        )));
    }
    if cfg.n_list.len() < 3 || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Config(String::from(
            "exponent fit needs at least 3 strictly increasing scales",
        )));
    }
    if cfg.n_list[0] == 0 || cfg.reps < 2 {
        return Err(LabError::Config(String::from(
            "exponent fit needs positive scales and reps >= 2",
        )));
    }

    let n0 = cfg.n_list[0];
    let seed = cfg.seed;
    let mut stream_base = 0u64;
    let mut stats = Vec::with_capacity(cfg.n_list.len());
    let mut csv = CsvTable::new("N,sd_crossing,stderr");
    for &scale in &cfg.n_list {
        let shape = char_rectangle(scale as f64, params);
        let (m, n) = (shape.m, shape.n);
        let level = ((cfg.tau * n as f64).floor() as usize).min(n - 1);
        let center = cfg.tau * m as f64;
        let band = (scale as f64).powf(2.0 / 3.0);
        let reps = scale_reps(cfg.reps, n0, scale);
        let base = stream_base;
        let rows = collect_replicas(run_replicas(reps, cfg.workers, move |r| {
            let mut rng = RngStream::new(seed, base + r as u64);
            let env = build_env(m, n, params, &mut rng)?;
            let lat = forward_logz(&env)?;
            let rev = reverse_logw(&env, (m, n))?;
            let cross = crossing_distribution(level, &lat, &rev)?;
            let mut m1 = 0.0;
            let mut s2 = 0.0;
            let mut tails = [0.0f64; 3];
            for (i, &p) in cross.pv.iter().enumerate() {
                let d = i as f64 - center;
                m1 += i as f64 * p;
                s2 += d * d * p;
                for (t, &b) in tails.iter_mut().zip(&TAIL_BS) {
                    if d.abs() > b * band {
                        *t += p;
                    }
                }
            }
            Ok((m1, s2, tails))
        }))?;
        stream_base += reps as u64;

        let mut mean = McSummary::new();
        let mut second = McSummary::new();
        let mut tails = [0.0f64; 3];
        for &(m1, s2, t) in &rows {
            mean.push(m1);
            second.push(s2);
            for (acc, v) in tails.iter_mut().zip(t) {
                *acc += v;
            }
        }
        for t in tails.iter_mut() {
            *t /= rows.len() as f64;
        }
        let centered = second.mean() - (mean.mean() - center).powi(2);
        let sd = centered.max(0.0).sqrt();
        let sd_stderr = second.stderr_mean() / (2.0 * sd);
        csv.rows.push(format!("{scale},{sd},{sd_stderr}"));
        eprintln!("zeta: N={scale} reps={reps} sd={sd:.3} (+/- {sd_stderr:.3})");
        stats.push(ScaleStats {
            scale,
            sd,
            mean,
            center,
            tails,
        });
    }

    let xs: Vec<f64> = stats.iter().map(|s| (s.scale as f64).ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.sd.ln()).collect();
    let fit = ols_slope(&xs, &ys)?;

    let mut report = ExperimentReport::new("zeta", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param(
        "n_list",
        cfg.n_list.iter().map(|&v| v as u64).collect::<Vec<u64>>(),
    );
    report.param("reps", cfg.reps as u64);
    report.param("tau", cfg.tau);
    report.param("workers", cfg.workers as u64);
    report.param("sigma_mult", cfg.tol.sigma_mult);

    report.push(
        Check::band(
            "sd_slope",
            "AC7",
            "log-log slope of the annealed crossing spread is 2/3 within 0.1",
            fit.slope,
            2.0 / 3.0 - 0.1,
            2.0 / 3.0 + 0.1,
        )
        .with("slope_stderr", fit.slope_stderr)
        .with("intercept", fit.intercept),
    );

    let top = stats.last().expect("at least three scales");
    let monotone = top.tails[0] >= top.tails[1]
        && top.tails[1] >= top.tails[2]
        && top.tails[0] > top.tails[2];
    report.push(
        Check::flag(
            "tail_monotone",
            "AC7",
            "annealed tail mass beyond b N^(2/3) decreases in b at the largest scale",
            top.tails[0] - top.tails[2],
            monotone,
        )
        .with("tail_b1", top.tails[0])
        .with("tail_b2", top.tails[1])
        .with("tail_b4", top.tails[2]),
    );

    for s in &stats {
        let rel = (s.mean.mean() - s.center) / s.center;
        report.push(
            Check::band(
                &format!("crossing_mean_n{}", s.scale),
                "aux",
                "annealed crossing mean tracks the characteristic column",
                rel,
                -CENTER_REL_TOL,
                CENTER_REL_TOL,
            )
            .with("mean", s.mean.mean())
            .with("center", s.center)
            .with("stderr", s.mean.stderr_mean()),
        );
    }

    report.finish(start);
    Ok(ExperimentOutcome {
        report,
        csv: Some(csv),
    })
}
