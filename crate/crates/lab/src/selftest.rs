//! Deterministic identity battery for the lattice layer.
//!
//! Every row here is exact up to floating-point roundoff: brute-force path
//! enumeration against the forward recursion, the local ratio recursions,
//! product decompositions of the corner value across levels and exits,
//! monotone boundary coupling, dual kernel stochasticity, replay identity
//! of the streaming and wavefront variants, and closed-form values on
//! all-ones environments. No tolerance is statistical.

use std::path::PathBuf;
use std::time::Instant;

use polymer_core::lattice::{
    bulk_logz, dual_weights, forward_logz, forward_logz_wavefront, log_add_exp, log_sum_exp,
    ratio_fields, reverse_logw, star_environment, star_lattice, streaming_antidiagonal_boundary,
    streaming_antidiagonal_bulk, streaming_corner_boundary, streaming_corner_bulk, total_logz,
    LogZLattice, TotalMode,
};
use polymer_core::polymer::{
    dual_exit_x_tail, exit_distribution, last_step_probability, reversed_exit_x_tail,
};
use polymer_core::randenv::{build_bulk_env, build_env, Environment};
use polymer_core::{ModelParams, RngStream};

use crate::dump;
use crate::experiments::{model_params, ExperimentOutcome};
use crate::report::{Check, ExperimentReport};
use crate::LabError;

/// Environments entering the brute-force comparison.
const BRUTE_FORCE_CASES: usize = 100;
/// Largest `m + n` the brute-force enumeration covers.
const BRUTE_FORCE_SPAN: usize = 12;
/// Environments entering the identity battery.
const IDENTITY_CASES: usize = 5;
/// Environments entering the duality tail battery.
const DUALITY_CASES: usize = 10;
/// Boundary shift of the monotone coupling row.
const COUPLING_DELTA: f64 = 0.25;

/// Configuration for [`run`].
#[derive(Debug, Clone, Default)]
pub struct SelftestConfig {
    /// Boundary shape parameter.
    pub theta: f64,
    /// Bulk shape parameter.
    pub mu: f64,
    /// Master seed.
    pub seed: u64,
    /// Optional path receiving a reference environment dump.
    pub dump_env: Option<PathBuf>,
    /// Optional path receiving a reference lattice dump.
    pub dump_lattice: Option<PathBuf>,
}

impl SelftestConfig {
    /// Battery defaults: an asymmetric parameter pair and the shared seed.
    pub fn new() -> Self {
        SelftestConfig {
            theta: 0.9,
            mu: 2.0,
            seed: crate::config::DEFAULT_SEED,
            dump_env: None,
            dump_lattice: None,
        }
    }
}

fn brute_force_corner(env: &Environment) -> f64 {
    let (m, n) = (env.m(), env.n());
    let steps = m + n;
    let mut terms = Vec::new();
    for mask in 0u32..(1 << steps) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let (mut i, mut j) = (0usize, 0usize);
        let mut log_w = 0.0;
        for b in 0..steps {
            if mask >> b & 1 == 1 {
                i += 1;
            } else {
                j += 1;
            }
            log_w += if j == 0 {
                env.log_u0(i)
            } else if i == 0 {
                env.log_v0(j)
            } else {
                env.log_y(i, j)
            };
        }
        terms.push(log_w);
    }
    log_sum_exp(&terms)
}

fn ones_boundary_env(params: ModelParams, m: usize, n: usize) -> Result<Environment, LabError> {
    Ok(Environment::from_boundary_parts(
        params,
        m,
        n,
        vec![0.0; m + 1],
        vec![0.0; n + 1],
        vec![0.0; (m + 1) * (n + 1)],
    )?)
}

fn lattice_bit_mismatches(a: &LogZLattice, b: &LogZLattice) -> usize {
    let (si, sj) = a.start();
    let mut bad = 0;
    for i in si..=a.m() {
        for j in sj..=a.n() {
            if a.at(i, j).to_bits() != b.at(i, j).to_bits() {
                bad += 1;
            }
        }
    }
    bad
}

/// Runs the battery and reports one check per identity family.
pub fn run(cfg: &SelftestConfig) -> Result<ExperimentOutcome, LabError> {
    let start = Instant::now();
    let params = model_params(cfg.theta, cfg.mu)?;

    let mut report = ExperimentReport::new("lattice_selftest", cfg.seed);
    report.param("theta", cfg.theta);
    report.param("mu", cfg.mu);
    report.param("brute_force_cases", BRUTE_FORCE_CASES as u64);
    report.param("identity_cases", IDENTITY_CASES as u64);

    let brute_start = Instant::now();
    let mut brute_worst = 0.0f64;
    for case in 0..BRUTE_FORCE_CASES {
        let mut rng = RngStream::new(cfg.seed, case as u64);
        let m = 1 + (rng.next_u64() % (BRUTE_FORCE_SPAN as u64 - 1)) as usize;
        let n = 1 + (rng.next_u64() % (BRUTE_FORCE_SPAN - m) as u64) as usize;
        let env = build_env(m, n, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        brute_worst = brute_worst.max((brute_force_corner(&env) - lat.corner()).abs());
    }
    let brute_ms = brute_start.elapsed().as_millis() as u64;
    report.push(
        Check::at_most(
            "brute_force_corner",
            "AC1",
            "forward recursion matches full path enumeration on small rectangles",
            brute_worst,
            1e-12,
        )
        .with("cases", BRUTE_FORCE_CASES as f64)
        .with("elapsed_ms", brute_ms as f64),
    );

    let mut ratio_worst = 0.0f64;
    let mut crossing_worst = 0.0f64;
    let mut exit_worst = 0.0f64;
    let mut coupling_worst = f64::NEG_INFINITY;
    let mut kernel_worst = 0.0f64;
    let mut level_zero_worst = 0.0f64;
    for case in 0..IDENTITY_CASES {
        let mut rng = RngStream::new(cfg.seed, 100 + case as u64);
        let (m, n) = (12, 9);
        let env = build_env(m, n, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let rev = reverse_logw(&env, (m, n))?;
        let ratios = ratio_fields(&lat);

        for i in 1..=m {
            for j in 1..=n {
                let u_rhs = env.log_y(i, j)
                    + log_add_exp(0.0, ratios.log_u(i, j - 1) - ratios.log_v(i - 1, j));
                let v_rhs = env.log_y(i, j)
                    + log_add_exp(0.0, ratios.log_v(i - 1, j) - ratios.log_u(i, j - 1));
                ratio_worst = ratio_worst
                    .max((ratios.log_u(i, j) - u_rhs).abs())
                    .max((ratios.log_v(i, j) - v_rhs).abs());
            }
        }

        let corner = lat.corner();
        for level in 0..n {
            let terms: Vec<f64> = (0..=m)
                .map(|i| lat.at(i, level) + rev.at(i, level + 1))
                .collect();
            crossing_worst = crossing_worst.max((log_sum_exp(&terms) - corner).abs());
        }

        let mut exit_terms = Vec::with_capacity(m + n);
        for k in 1..=m {
            exit_terms.push(lat.at(k, 0) + rev.at(k, 1));
        }
        for l in 1..=n {
            exit_terms.push(lat.at(0, l) + rev.at(1, l));
        }
        exit_worst = exit_worst.max((log_sum_exp(&exit_terms) - corner).abs());

        let shifted = env.perturb_boundary_ordered(COUPLING_DELTA)?;
        let shifted_ratios = ratio_fields(&forward_logz(&shifted)?);
        for i in 1..=m {
            for j in 0..=n {
                coupling_worst =
                    coupling_worst.max(shifted_ratios.log_u(i, j) - ratios.log_u(i, j));
            }
        }
        for i in 0..=m {
            for j in 1..=n {
                coupling_worst =
                    coupling_worst.max(ratios.log_v(i, j) - shifted_ratios.log_v(i, j));
            }
        }

        let dual = dual_weights(&lat, &env)?;
        for i in 0..=m {
            for j in 0..=n {
                if i == m && j == n {
                    continue;
                }
                let mut mass = 0.0;
                if i < m {
                    mass += (dual.log_x(i, j) + lat.at(i, j) - lat.at(i + 1, j)).exp();
                }
                if j < n {
                    mass += (dual.log_x(i, j) + lat.at(i, j) - lat.at(i, j + 1)).exp();
                }
                kernel_worst = kernel_worst.max((mass - 1.0).abs());
            }
        }

        let exd = exit_distribution(&env, &lat, &rev)?;
        let crossing = polymer_core::polymer::crossing_distribution(0, &lat, &rev)?;
        let py_total: f64 = exd.py.iter().sum();
        level_zero_worst = level_zero_worst.max((crossing.pv[0] - py_total).abs());
        for k in 1..=m {
            level_zero_worst = level_zero_worst.max((crossing.pv[k] - exd.px[k]).abs());
        }
    }
    report.push(Check::at_most(
        "ratio_recursion",
        "aux",
        "partition ratios satisfy the local two-ratio recursion",
        ratio_worst,
        1e-10,
    ));
    report.push(Check::at_most(
        "crossing_decomposition",
        "aux",
        "forward times reverse mass across each level recovers the corner",
        crossing_worst,
        1e-10,
    ));
    report.push(Check::at_most(
        "exit_decomposition",
        "aux",
        "forward times reverse mass across both axes recovers the corner",
        exit_worst,
        1e-10,
    ));
    report.push(Check::at_most(
        "monotone_coupling",
        "aux",
        "ordered boundary shift lowers all horizontal and raises all vertical ratios",
        coupling_worst,
        1e-10,
    ));
    report.push(Check::at_most(
        "dual_kernel_rows",
        "aux",
        "dual transition kernel is stochastic at every site",
        kernel_worst,
        1e-12,
    ));
    report.push(Check::at_most(
        "crossing_level_zero",
        "aux",
        "level-zero crossing law aggregates the exit law",
        level_zero_worst,
        1e-12,
    ));

    let mut replay_mismatches = 0usize;
    {
        let mut rng = RngStream::new(cfg.seed, 150);
        let env = build_env(12, 9, params, &mut rng)?;
        replay_mismatches +=
            lattice_bit_mismatches(&forward_logz(&env)?, &forward_logz_wavefront(&env)?);

        let mut env_rng = RngStream::new(cfg.seed, 151);
        let env = build_env(20, 15, params, &mut env_rng)?;
        let mut stream_rng = RngStream::new(cfg.seed, 151);
        let corner = streaming_corner_boundary(20, 15, params, &mut stream_rng)?;
        replay_mismatches += usize::from(corner.to_bits() != forward_logz(&env)?.corner().to_bits());

        let mut env_rng = RngStream::new(cfg.seed, 152);
        let env = build_bulk_env(10, 10, cfg.mu, &mut env_rng)?;
        let mut stream_rng = RngStream::new(cfg.seed, 152);
        let corner = streaming_corner_bulk(10, 10, cfg.mu, &mut stream_rng)?;
        replay_mismatches += usize::from(
            corner.to_bits() != bulk_logz(&env, (1, 1))?.at(10, 10).to_bits(),
        );

        let scale = 12;
        let mut env_rng = RngStream::new(cfg.seed, 153);
        let env = build_env(scale, scale, params, &mut env_rng)?;
        let lat = forward_logz(&env)?;
        let mut stream_rng = RngStream::new(cfg.seed, 153);
        let diag = streaming_antidiagonal_boundary(scale, params, &mut stream_rng)?;
        for (l, v) in diag.iter().enumerate() {
            replay_mismatches += usize::from(v.to_bits() != lat.at(l, scale - l).to_bits());
        }

        let mut env_rng = RngStream::new(cfg.seed, 154);
        let env = build_bulk_env(scale - 1, scale - 1, cfg.mu, &mut env_rng)?;
        let lat = bulk_logz(&env, (1, 1))?;
        let mut stream_rng = RngStream::new(cfg.seed, 154);
        let diag = streaming_antidiagonal_bulk(scale, cfg.mu, &mut stream_rng)?;
        for (idx, v) in diag.iter().enumerate() {
            let k = idx + 1;
            replay_mismatches += usize::from(v.to_bits() != lat.at(k, scale - k).to_bits());
        }
    }
    report.push(Check::at_most(
        "deterministic_replay",
        "aux",
        "wavefront and streaming variants replay the forward recursion bit for bit",
        replay_mismatches as f64,
        0.0,
    ));

    let mut ones_worst = 0.0f64;
    {
        let env = ones_boundary_env(params, 10, 10)?;
        let total = total_logz(&env, TotalMode::Boundary)?;
        ones_worst = ones_worst.max((total - 10.0 * core::f64::consts::LN_2).abs());
        let bulk = Environment::from_bulk_parts(cfg.mu, 9, 9, vec![0.0; 100])?;
        let total = total_logz(&bulk, TotalMode::Bulk)?;
        ones_worst = ones_worst.max((total - 8.0 * core::f64::consts::LN_2).abs());
    }
    report.push(Check::at_most(
        "all_ones_totals",
        "aux",
        "free-endpoint totals on all-ones weights count paths exactly",
        ones_worst,
        1e-12,
    ));

    let mut exact_worst = 0.0f64;
    {
        let env = ones_boundary_env(params, 4, 4)?;
        let lat = forward_logz(&env)?;
        let rev = reverse_logw(&env, (4, 4))?;
        exact_worst = exact_worst.max((lat.corner() - 70.0f64.ln()).abs());
        let exd = exit_distribution(&env, &lat, &rev)?;
        let binomial_law = [2.0 / 7.0, 1.0 / 7.0, 2.0 / 35.0, 1.0 / 70.0];
        for (k, &want) in binomial_law.iter().enumerate() {
            exact_worst = exact_worst
                .max((exd.px[k + 1] - want).abs())
                .max((exd.py[k + 1] - want).abs());
        }
        exact_worst = exact_worst.max((last_step_probability(&lat)? - 0.5).abs());
    }
    report.push(Check::at_most(
        "all_ones_exit_law",
        "aux",
        "exit law and corner on all-ones weights match the binomial counts",
        exact_worst,
        1e-13,
    ));

    let mut tail_worst = 0.0f64;
    for case in 0..DUALITY_CASES {
        let mut rng = RngStream::new(cfg.seed, 200 + case as u64);
        let env = build_env(6, 5, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let dual = dual_weights(&lat, &env)?;
        let star = star_lattice(&lat)?;
        let star_env = star_environment(&env, &lat)?;
        for k in [1usize, 2, 5] {
            let via_dual = dual_exit_x_tail(&dual, &lat, k)?;
            let via_star = reversed_exit_x_tail(&star, &star_env, k)?;
            tail_worst = tail_worst.max((via_dual - via_star).abs());
        }
        tail_worst = tail_worst
            .max((reversed_exit_x_tail(&lat, &env, 1)? - last_step_probability(&lat)?).abs());
    }
    report.push(Check::at_most(
        "dual_reversal_tails",
        "aux",
        "dual exit tails equal reversed tails of the star system pointwise",
        tail_worst,
        1e-10,
    ));

    if cfg.dump_env.is_some() || cfg.dump_lattice.is_some() {
        let mut rng = RngStream::new(cfg.seed, 300);
        let env = build_env(8, 6, params, &mut rng)?;
        let lat = forward_logz(&env)?;
        let mut dump_mismatches = 0usize;
        if let Some(path) = &cfg.dump_env {
            dump::write_environment(path, &env)?;
            let back = dump::read_environment(path)?;
            for i in 1..=env.m() {
                dump_mismatches +=
                    usize::from(back.log_u0(i).to_bits() != env.log_u0(i).to_bits());
            }
            for j in 1..=env.n() {
                dump_mismatches +=
                    usize::from(back.log_v0(j).to_bits() != env.log_v0(j).to_bits());
            }
            for i in 1..=env.m() {
                for j in 1..=env.n() {
                    dump_mismatches +=
                        usize::from(back.log_y(i, j).to_bits() != env.log_y(i, j).to_bits());
                }
            }
            dump_mismatches += usize::from(
                forward_logz(&back)?.corner().to_bits() != lat.corner().to_bits(),
            );
        }
        if let Some(path) = &cfg.dump_lattice {
            dump::write_lattice(path, &lat)?;
            let back = dump::read_lattice(path)?;
            for i in 0..=lat.m() {
                for j in 0..=lat.n() {
                    dump_mismatches +=
                        usize::from(back.at(i, j).to_bits() != lat.at(i, j).to_bits());
                }
            }
        }
        report.push(Check::at_most(
            "dump_round_trip",
            "aux",
            "environment and lattice dumps reload bit for bit",
            dump_mismatches as f64,
            0.0,
        ));
    }

    report.finish(start);
    Ok(ExperimentOutcome { report, csv: None })
}
