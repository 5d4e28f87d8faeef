//! Command-line front end of the simulation laboratory.
//!
//! Each subcommand builds one experiment configuration from, in order of
//! precedence, explicit flags, the optional TOML config file, the
//! `POLYMER_SEED` environment variable (seed only), and built-in defaults,
//! then runs it. The human-readable summary goes to standard error;
//! standard output stays silent unless `--stdout` requests the JSON
//! report. Exit code 0 means every check passed, 1 means the run finished
//! with failing checks or an execution error, 2 means the configuration
//! was rejected.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polymer_lab::config::{resolve_seed, FileConfig, Tolerances};
use polymer_lab::experiments::{
    boundary_free_endpoint, burke, chi, clt, duality, fixed_point, free_endpoint, lln, mean,
    var_identity, zeta, ExperimentOutcome,
};
use polymer_lab::report::ExperimentReport;
use polymer_lab::selftest::{self, SelftestConfig};
use polymer_lab::LabError;

#[derive(Debug, Parser)]
#[command(
    name = "polymer",
    version,
    about = "Simulation laboratory for the log-gamma directed polymer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed; falls back to the config file, then POLYMER_SEED, then 42.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML config file supplying defaults; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for replica batches; defaults to the logical core count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write the JSON report to this path.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Write the per-replica or per-scale CSV table to this path.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Print the JSON report to standard output.
    #[arg(long, global = true)]
    stdout: bool,

    /// Width of moment acceptance bands in standard errors.
    #[arg(long, global = true)]
    sigma_mult: Option<f64>,

    /// Smallest KS p-value that still counts as a pass.
    #[arg(long, global = true)]
    p_threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Independence and marginals of ratio and dual weights on a down-right path.
    Burke {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Side length of the square rectangle.
        #[arg(long)]
        size: Option<usize>,
        /// Environment replicas.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Distributional fixed point of the one-step weight update.
    FixedPoint {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Triple draws.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Exact variance identity at the characteristic rectangle of scale N.
    VarIdentity {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Characteristic scale N.
        #[arg(long)]
        n: Option<usize>,
        /// Environment replicas.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Growth exponent of Var[log Z] across characteristic scales.
    Chi {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Comma-separated strictly increasing scales.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        /// Replicas at the smallest scale; larger scales decay from it.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Transversal exponent of the annealed crossing law.
    Zeta {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Comma-separated strictly increasing scales.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        /// Replicas at the smallest scale; larger scales decay from it.
        #[arg(long)]
        reps: Option<usize>,
        /// Height fraction of the crossing level.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Gaussian limit of log Z off the characteristic direction.
    CltOffchar {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Characteristic scale N.
        #[arg(long)]
        n: Option<usize>,
        /// Off-characteristic exponent in (2/3, 1].
        #[arg(long)]
        alpha: Option<f64>,
        /// Off-characteristic displacement coefficient.
        #[arg(long)]
        c1: Option<f64>,
        /// Environment replicas.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Law of large numbers of the bulk model along a fixed direction.
    LlnBulk {
        /// Horizontal direction component.
        #[arg(long)]
        s: Option<f64>,
        /// Vertical direction component.
        #[arg(long)]
        t: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Scale N of the endpoint (floor(Ns), floor(Nt)).
        #[arg(long)]
        n: Option<usize>,
        /// Environment replicas.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Free-endpoint ensemble of the bulk model on anti-diagonals.
    FreeEndpoint {
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Comma-separated strictly increasing scales.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        /// Environment replicas.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Free-endpoint ensemble of the boundary model on anti-diagonals.
    BoundaryFreeEndpoint {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Anti-diagonal scale N.
        #[arg(long)]
        n: Option<usize>,
        /// Environment replicas.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Reversal duality of exit laws and the last-step beta law.
    Duality {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Rectangle width.
        #[arg(long)]
        m: Option<usize>,
        /// Rectangle height.
        #[arg(long)]
        n: Option<usize>,
        /// Replicas per ensemble.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Deterministic lattice identity battery.
    LatticeSelftest {
        /// Boundary shape parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Bulk shape parameter.
        #[arg(long)]
        mu: Option<f64>,
        /// Write a reference environment dump here and verify its round trip.
        #[arg(long, value_name = "PATH")]
        dump_env: Option<PathBuf>,
        /// Write a reference lattice dump here and verify its round trip.
        #[arg(long, value_name = "PATH")]
        dump_lattice: Option<PathBuf>,
    },
    /// Every experiment in sequence at its documented defaults.
    All,
}

impl Command {
    fn supports_csv(&self) -> bool {
        matches!(
            self,
            Command::VarIdentity { .. }
                | Command::Chi { .. }
                | Command::Zeta { .. }
                | Command::CltOffchar { .. }
                | Command::LlnBulk { .. }
                | Command::FreeEndpoint { .. }
                | Command::BoundaryFreeEndpoint { .. }
        )
    }
}

/// Globals every experiment configuration shares, already merged across
/// flag, file, and environment sources.
struct Shared {
    seed: u64,
    workers: usize,
    tol: Tolerances,
}

fn merge_shared(cli: &Cli, file: &FileConfig) -> Result<Shared, LabError> {
    let seed = resolve_seed(cli.seed, file.seed)?;
    let workers = cli
        .workers
        .or(file.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    if workers == 0 {
        return Err(LabError::Config(String::from(
            "worker count must be at least 1",
        )));
    }
    let defaults = Tolerances::default();
    let tol = Tolerances {
        sigma_mult: cli.sigma_mult.or(file.sigma_mult).unwrap_or(defaults.sigma_mult),
        p_threshold: cli
            .p_threshold
            .or(file.p_threshold)
            .unwrap_or(defaults.p_threshold),
    };
    if !tol.sigma_mult.is_finite() || tol.sigma_mult <= 0.0 {
        return Err(LabError::Config(String::from(
            "sigma multiplier must be finite and positive",
        )));
    }
    if !(0.0..1.0).contains(&tol.p_threshold) {
        return Err(LabError::Config(String::from(
            "p-value threshold must lie in [0, 1)",
        )));
    }
    Ok(Shared { seed, workers, tol })
}

fn run_command(cli: &Cli) -> Result<Vec<ExperimentOutcome>, LabError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let shared = merge_shared(cli, &file)?;
    let outcome = match &cli.command {
        Command::Burke {
            theta,
            mu,
            size,
            reps,
        } => {
            let d = burke::BurkeConfig::default();
            burke::run(&burke::BurkeConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                size: size.or(file.n).unwrap_or(d.size),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::FixedPoint { theta, mu, reps } => {
            let d = fixed_point::FixedPointConfig::default();
            fixed_point::run(&fixed_point::FixedPointConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::VarIdentity {
            theta,
            mu,
            n,
            reps,
        } => {
            let d = var_identity::VarIdentityConfig::default();
            var_identity::run(&var_identity::VarIdentityConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_scale: n.or(file.n).unwrap_or(d.n_scale),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::Chi {
            theta,
            mu,
            n_list,
            reps,
        } => {
            let d = chi::ChiConfig::default();
            chi::run(&chi::ChiConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_list: n_list
                    .clone()
                    .or_else(|| file.n_list.clone())
                    .unwrap_or(d.n_list),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::Zeta {
            theta,
            mu,
            n_list,
            reps,
            tau,
        } => {
            let d = zeta::ZetaConfig::default();
            zeta::run(&zeta::ZetaConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_list: n_list
                    .clone()
                    .or_else(|| file.n_list.clone())
                    .unwrap_or(d.n_list),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                tau: tau.or(file.tau).unwrap_or(d.tau),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::CltOffchar {
            theta,
            mu,
            n,
            alpha,
            c1,
            reps,
        } => {
            let d = clt::CltConfig::default();
            clt::run(&clt::CltConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_scale: n.or(file.n).unwrap_or(d.n_scale),
                alpha: alpha.or(file.alpha).unwrap_or(d.alpha),
                c1: c1.or(file.c1).unwrap_or(d.c1),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::LlnBulk { s, t, mu, n, reps } => {
            let d = lln::LlnConfig::default();
            lln::run(&lln::LlnConfig {
                s: s.or(file.s).unwrap_or(d.s),
                t: t.or(file.t).unwrap_or(d.t),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_scale: n.or(file.n).unwrap_or(d.n_scale),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::FreeEndpoint { mu, n_list, reps } => {
            let d = free_endpoint::FreeEndpointConfig::default();
            free_endpoint::run(&free_endpoint::FreeEndpointConfig {
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_list: n_list
                    .clone()
                    .or_else(|| file.n_list.clone())
                    .unwrap_or(d.n_list),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::BoundaryFreeEndpoint {
            theta,
            mu,
            n,
            reps,
        } => {
            let d = boundary_free_endpoint::BoundaryFreeEndpointConfig::default();
            boundary_free_endpoint::run(&boundary_free_endpoint::BoundaryFreeEndpointConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                n_scale: n.or(file.n).unwrap_or(d.n_scale),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::Duality {
            theta,
            mu,
            m,
            n,
            reps,
        } => {
            let d = duality::DualityConfig::default();
            duality::run(&duality::DualityConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                m: m.or(file.m).unwrap_or(d.m),
                n: n.or(file.n).unwrap_or(d.n),
                reps: reps.or(file.reps).unwrap_or(d.reps),
                seed: shared.seed,
                workers: shared.workers,
                tol: shared.tol,
            })?
        }
        Command::LatticeSelftest {
            theta,
            mu,
            dump_env,
            dump_lattice,
        } => {
            let d = SelftestConfig::new();
            selftest::run(&SelftestConfig {
                theta: theta.or(file.theta).unwrap_or(d.theta),
                mu: mu.or(file.mu).unwrap_or(d.mu),
                seed: shared.seed,
                dump_env: dump_env.clone(),
                dump_lattice: dump_lattice.clone(),
            })?
        }
        Command::All => return run_all(&shared),
    };
    Ok(vec![outcome])
}

/// Runs the full battery at documented defaults, sharing seed, workers, and
/// tolerances. Experiment-specific file or flag values are not applied.
fn run_all(shared: &Shared) -> Result<Vec<ExperimentOutcome>, LabError> {
    let mut outcomes = Vec::new();

    let mut selftest_cfg = SelftestConfig::new();
    selftest_cfg.seed = shared.seed;
    outcomes.push(selftest::run(&selftest_cfg)?);

    let mut cfg = mean::MeanConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(mean::run(&cfg)?);

    let mut cfg = burke::BurkeConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(burke::run(&cfg)?);

    let mut cfg = fixed_point::FixedPointConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(fixed_point::run(&cfg)?);

    let mut cfg = var_identity::VarIdentityConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(var_identity::run(&cfg)?);

    let mut cfg = duality::DualityConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(duality::run(&cfg)?);

    let mut cfg = lln::LlnConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(lln::run(&cfg)?);

    let mut cfg = free_endpoint::FreeEndpointConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(free_endpoint::run(&cfg)?);

    let mut cfg = boundary_free_endpoint::BoundaryFreeEndpointConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(boundary_free_endpoint::run(&cfg)?);

    let mut cfg = boundary_free_endpoint::BoundaryFreeEndpointConfig::default();
    cfg.theta = cfg.mu / 2.0;
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(boundary_free_endpoint::run(&cfg)?);

    let mut cfg = zeta::ZetaConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(zeta::run(&cfg)?);

    let mut cfg = clt::CltConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(clt::run(&cfg)?);

    let mut cfg = chi::ChiConfig::default();
    cfg.seed = shared.seed;
    cfg.workers = shared.workers;
    cfg.tol = shared.tol;
    outcomes.push(chi::run(&cfg)?);

    Ok(outcomes)
}

fn emit(outcomes: &[ExperimentOutcome], cli: &Cli) -> Result<bool, LabError> {
    for outcome in outcomes {
        eprint!("{}", outcome.report.summary());
    }
    let json = if outcomes.len() == 1 {
        outcomes[0].report.to_json()
    } else {
        let reports: Vec<&ExperimentReport> = outcomes.iter().map(|o| &o.report).collect();
        serde_json::to_string_pretty(&reports).expect("reports contain only serializable data")
    };
    if let Some(path) = &cli.out {
        std::fs::write(path, &json)?;
    }
    if cli.stdout {
        println!("{json}");
    }
    if let Some(path) = &cli.csv {
        let table = outcomes
            .iter()
            .find_map(|o| o.csv.as_ref())
            .expect("csv support was validated before running");
        std::fs::write(path, table.render())?;
    }
    Ok(outcomes.iter().all(|o| o.report.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.csv.is_some() && !cli.command.supports_csv() {
        eprintln!("error: this subcommand produces no CSV table");
        return ExitCode::from(2);
    }
    match run_command(&cli).and_then(|outcomes| emit(&outcomes, &cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(LabError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
