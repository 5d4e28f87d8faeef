//! Exact quenched path laws on a fixed environment.
//!
//! Given the forward lattice of an environment, the quenched polymer
//! measure weights each up-right path from the origin to `(m, n)` by the
//! product of its weights divided by `Z_{m,n}`. Everything here is exact:
//! path sampling walks backward through the transition probabilities the
//! lattice already determines, exit and crossing laws come out of
//! forward/reverse lattice products, and the dual measure uses the dual
//! weight field. No Monte Carlo enters except in the samplers themselves.

use alloc::vec;
use alloc::vec::Vec;

use libm::exp;

use crate::lattice::{DualWeights, LogZLattice, ReverseLattice};
use crate::randenv::{Environment, RngStream};
use crate::specfun::phi;
use crate::Error;

/// An up-right lattice path stored as its full point sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolymerPath {
    points: Vec<(usize, usize)>,
}

impl PolymerPath {
    /// Builds a path from its point sequence, validating that it starts at
    /// the origin and moves by unit east or north steps.
    pub fn from_points(points: Vec<(usize, usize)>) -> Result<Self, Error> {
        if points.is_empty() || points[0] != (0, 0) {
            return Err(Error::InvalidParameter {
                what: "path must start at the origin",
            });
        }
        for w in points.windows(2) {
            let ((a, b), (c, d)) = (w[0], w[1]);
            let east = c == a + 1 && d == b;
            let north = c == a && d == b + 1;
            if !east && !north {
                return Err(Error::InvalidParameter {
                    what: "path steps must be unit east or north moves",
                });
            }
        }
        Ok(Self { points })
    }

    /// The point sequence from `(0, 0)` to the endpoint.
    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    /// Final point of the path.
    pub fn endpoint(&self) -> (usize, usize) {
        *self.points.last().expect("paths are never empty")
    }
}

/// Exit law of the quenched measure: `px[k]` is the probability that the
/// path leaves the horizontal axis at `(k, 0)` (its last axis point on that
/// side), `py[l]` likewise on the vertical axis. Index 0 of both vectors is
/// zero on non-degenerate rectangles: a path exits through exactly one
/// axis, at depth at least 1, so the two vectors together sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitDistribution {
    /// Horizontal exit probabilities, length `m + 1`.
    pub px: Vec<f64>,
    /// Vertical exit probabilities, length `n + 1`.
    pub py: Vec<f64>,
}

/// Law of the horizontal position at which the path crosses from height
/// `level` to height `level + 1`: `pv[i]` is the quenched probability that
/// the crossing step is `(i, level) -> (i, level + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingDistribution {
    /// The height below the crossing edge.
    pub level: usize,
    /// Crossing position probabilities, length `m + 1`.
    pub pv: Vec<f64>,
}

/// Coordinate functionals of one path: extreme columns per row, extreme
/// rows per column, and the two exit depths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathFunctionals {
    /// Leftmost column visited at each height, length `n + 1`.
    pub v_min: Vec<usize>,
    /// Rightmost column visited at each height, length `n + 1`.
    pub v_max: Vec<usize>,
    /// Lowest height visited at each column, length `m + 1`.
    pub w_min: Vec<usize>,
    /// Highest height visited at each column, length `m + 1`.
    pub w_max: Vec<usize>,
    /// Last horizontal-axis point on the path, `v_max[0]`.
    pub exit_x: usize,
    /// Last vertical-axis point on the path, `w_max[0]`.
    pub exit_y: usize,
}

/// Which axis an exit-weighted sum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// The horizontal axis, shapes `theta`.
    Horizontal,
    /// The vertical axis, shapes `mu - theta`.
    Vertical,
}

fn require_origin_pair(lat: &LogZLattice, env: &Environment) -> Result<(), Error> {
    if lat.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "operation needs an origin-rooted lattice",
        });
    }
    if lat.m() != env.m() || lat.n() != env.n() {
        return Err(Error::DimensionMismatch {
            what: "lattice and environment shapes disagree",
        });
    }
    Ok(())
}

/// Draws one path from the quenched polymer measure by walking backward
/// from `(m, n)`: at each interior site the west predecessor is chosen with
/// probability `Z_west Y / Z`, and axis sites continue along their axis.
pub fn sample_path(
    lat: &LogZLattice,
    env: &Environment,
    rng: &mut RngStream,
) -> Result<PolymerPath, Error> {
    if !env.has_boundary() {
        return Err(Error::MissingBoundary);
    }
    require_origin_pair(lat, env)?;
    let mut rev_points = Vec::with_capacity(lat.m() + lat.n() + 1);
    let (mut i, mut j) = (lat.m(), lat.n());
    rev_points.push((i, j));
    while i > 0 || j > 0 {
        if i == 0 {
            j -= 1;
        } else if j == 0 {
            i -= 1;
        } else {
            let p_west = exp(lat.at(i - 1, j) + env.log_y(i, j) - lat.at(i, j));
            if rng.uniform_open01() <= p_west {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        rev_points.push((i, j));
    }
    rev_points.reverse();
    PolymerPath::from_points(rev_points)
}

/// Draws one path of the dual measure by walking forward from the origin:
/// east steps are taken with probability `X Z / Z_east`, and the boundary
/// conventions of the dual weights put probability one on forced steps.
pub fn sample_dual_path(
    dual: &DualWeights,
    lat: &LogZLattice,
    rng: &mut RngStream,
) -> Result<PolymerPath, Error> {
    if lat.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "operation needs an origin-rooted lattice",
        });
    }
    if dual.dims() != (lat.m(), lat.n()) {
        return Err(Error::DimensionMismatch {
            what: "dual weights and lattice shapes disagree",
        });
    }
    let (m, n) = dual.dims();
    let mut points = Vec::with_capacity(m + n + 1);
    let (mut i, mut j) = (0, 0);
    points.push((i, j));
    while i < m || j < n {
        if i == m {
            j += 1;
        } else if j == n {
            i += 1;
        } else {
            let p_east = exp(dual.log_x(i, j) + lat.at(i, j) - lat.at(i + 1, j));
            if rng.uniform_open01() <= p_east {
                i += 1;
            } else {
                j += 1;
            }
        }
        points.push((i, j));
    }
    PolymerPath::from_points(points)
}

fn normalize(probs: &mut [f64], what: &'static str) -> Result<(), Error> {
    let sum: f64 = probs.iter().sum();
    let residual = (sum - 1.0).abs();
    if !(residual <= 1e-10) {
        return Err(Error::NumericalFailure { what, residual });
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Exact exit law of the quenched measure, from the forward lattice and the
/// reverse lattice of the full rectangle:
/// `px[k] = Z_{k,0} W_{k,1} / Z_{m,n}` and `py[l] = Z_{0,l} W_{1,l} / Z_{m,n}`.
///
/// Degenerate rectangles are allowed: with `n = 0` the whole mass sits at
/// `px[m]`, and symmetrically. The computed law is renormalized; if its raw
/// total strays from one by more than 1e-10 the computation is rejected
/// instead.
pub fn exit_distribution(
    env: &Environment,
    lat: &LogZLattice,
    rev: &ReverseLattice,
) -> Result<ExitDistribution, Error> {
    if !env.has_boundary() {
        return Err(Error::MissingBoundary);
    }
    require_origin_pair(lat, env)?;
    let (m, n) = (lat.m(), lat.n());
    if rev.endpoint() != (m, n) || rev.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "reverse lattice must cover the full rectangle",
        });
    }
    if m == 0 && n == 0 {
        return Err(Error::InvalidParameter {
            what: "exit law needs a nonempty rectangle",
        });
    }
    let mut px = vec![0.0; m + 1];
    let mut py = vec![0.0; n + 1];
    if n == 0 {
        px[m] = 1.0;
        return Ok(ExitDistribution { px, py });
    }
    if m == 0 {
        py[n] = 1.0;
        return Ok(ExitDistribution { px, py });
    }
    let corner = lat.corner();
    for k in 1..=m {
        px[k] = exp(lat.at(k, 0) + rev.at(k, 1) - corner);
    }
    for l in 1..=n {
        py[l] = exp(lat.at(0, l) + rev.at(1, l) - corner);
    }
    let mut all: Vec<f64> = px.iter().chain(py.iter()).copied().collect();
    normalize(&mut all, "exit law normalization")?;
    px.copy_from_slice(&all[..m + 1]);
    py.copy_from_slice(&all[m + 1..]);
    Ok(ExitDistribution { px, py })
}

/// Expected value under the exit law of the partial sums of the variance
/// kernel along one axis:
/// `sum_k px[k] sum_{i<=k} phi(theta, U_{i,0}^{-1})` for the horizontal
/// axis, and the mirrored sum with shape `mu - theta` on the vertical axis.
pub fn exit_phi_expectation(
    env: &Environment,
    exd: &ExitDistribution,
    axis: Axis,
) -> Result<f64, Error> {
    let params = env.params().ok_or(Error::MissingBoundary)?;
    let (len, shape) = match axis {
        Axis::Horizontal => (env.m(), params.theta()),
        Axis::Vertical => (env.n(), params.v_shape()),
    };
    let probs = match axis {
        Axis::Horizontal => &exd.px,
        Axis::Vertical => &exd.py,
    };
    if probs.len() != len + 1 {
        return Err(Error::DimensionMismatch {
            what: "exit law length does not match the environment",
        });
    }
    let mut expectation = 0.0;
    let mut prefix = 0.0;
    for k in 1..=len {
        let log_w = match axis {
            Axis::Horizontal => env.log_u0(k),
            Axis::Vertical => env.log_v0(k),
        };
        prefix += phi(shape, exp(-log_w));
        expectation += probs[k] * prefix;
    }
    Ok(expectation)
}

/// Probability that the path's final step is horizontal,
/// `Z_{m-1,n} Y_{m,n} / Z_{m,n} = U^{-1} / (U^{-1} + V^{-1})` at the corner.
pub fn last_step_probability(lat: &LogZLattice) -> Result<f64, Error> {
    if lat.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "operation needs an origin-rooted lattice",
        });
    }
    let (m, n) = (lat.m(), lat.n());
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            what: "last step probability needs m, n >= 1",
        });
    }
    Ok(1.0 / (1.0 + exp(lat.at(m, n - 1) - lat.at(m - 1, n))))
}

/// Exact law of the crossing position from height `level` to `level + 1`:
/// `pv[i] = Z_{i,level} W_{i,level+1} / Z_{m,n}`. Requires `level < n`.
/// Renormalization policy as in [`exit_distribution`].
pub fn crossing_distribution(
    level: usize,
    lat: &LogZLattice,
    rev: &ReverseLattice,
) -> Result<CrossingDistribution, Error> {
    if lat.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "operation needs an origin-rooted lattice",
        });
    }
    let (m, n) = (lat.m(), lat.n());
    if rev.endpoint() != (m, n) || rev.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "reverse lattice must cover the full rectangle",
        });
    }
    if level >= n {
        return Err(Error::InvalidParameter {
            what: "crossing level must be below the top row",
        });
    }
    let corner = lat.corner();
    let mut pv = vec![0.0; m + 1];
    for (i, p) in pv.iter_mut().enumerate() {
        *p = exp(lat.at(i, level) + rev.at(i, level + 1) - corner);
    }
    normalize(&mut pv, "crossing law normalization")?;
    Ok(CrossingDistribution { level, pv })
}

/// Coordinate functionals of a path ending at `(m, n)`.
pub fn path_functionals(path: &PolymerPath) -> PathFunctionals {
    let (m, n) = path.endpoint();
    let mut v_min = vec![usize::MAX; n + 1];
    let mut v_max = vec![0; n + 1];
    let mut w_min = vec![usize::MAX; m + 1];
    let mut w_max = vec![0; m + 1];
    for &(i, j) in path.points() {
        v_min[j] = v_min[j].min(i);
        v_max[j] = v_max[j].max(i);
        w_min[i] = w_min[i].min(j);
        w_max[i] = w_max[i].max(j);
    }
    let exit_x = v_max[0];
    let exit_y = w_max[0];
    PathFunctionals {
        v_min,
        v_max,
        w_min,
        w_max,
        exit_x,
        exit_y,
    }
}

/// Probability under the dual measure that the first `k` steps all run east
/// along the bottom row: the product of the east-step kernel values at
/// `(0,0) .. (k-1,0)`.
pub fn dual_exit_x_tail(dual: &DualWeights, lat: &LogZLattice, k: usize) -> Result<f64, Error> {
    let (m, n) = dual.dims();
    if lat.start() != (0, 0) || (lat.m(), lat.n()) != (m, n) {
        return Err(Error::DimensionMismatch {
            what: "dual weights and lattice shapes disagree",
        });
    }
    if k > m {
        return Err(Error::InvalidParameter {
            what: "dual exit depth exceeds the rectangle",
        });
    }
    if k > 0 && n == 0 {
        return Ok(1.0);
    }
    let mut log_p = 0.0;
    for i in 0..k {
        log_p += dual.log_x(i, 0) + lat.at(i, 0) - lat.at(i + 1, 0);
    }
    Ok(exp(log_p))
}

/// Probability under the quenched measure that the final `k` steps all run
/// east along the top row: `Z_{m-k,n} (prod of top-row bulk weights) / Z_{m,n}`.
pub fn reversed_exit_x_tail(
    lat: &LogZLattice,
    env: &Environment,
    k: usize,
) -> Result<f64, Error> {
    require_origin_pair(lat, env)?;
    let (m, n) = (lat.m(), lat.n());
    if k > m {
        return Err(Error::InvalidParameter {
            what: "exit depth exceeds the rectangle",
        });
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut log_p = lat.at(m - k, n) - lat.corner();
    for i in (m - k + 1)..=m {
        log_p += env.log_y(i, n);
    }
    Ok(exp(log_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        bulk_logz, dual_weights, forward_logz, log_sum_exp, reverse_logw,
    };
    use crate::randenv::build_env;
    use crate::specfun::ModelParams;
    use crate::stats::{chi_square_cdf, two_sample_ks};

    fn params() -> ModelParams {
        ModelParams::new(0.9, 2.0).unwrap()
    }

    fn ones_env(m: usize, n: usize) -> Environment {
        Environment::from_boundary_parts(
            params(),
            m,
            n,
            vec![0.0; m + 1],
            vec![0.0; n + 1],
            vec![0.0; (m + 1) * (n + 1)],
        )
        .unwrap()
    }

    fn binomial(n: u64, k: u64) -> f64 {
        let mut v = 1.0;
        for i in 0..k.min(n - k) {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        v
    }

    #[test]
    fn exit_law_all_ones_is_exact() {
        let env = ones_env(3, 3);
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (3, 3)).unwrap();
        let exd = exit_distribution(&env, &lat, &rev).unwrap();
        let total = binomial(6, 3);
        for k in 1..=3usize {
            let want = binomial(3 - k as u64 + 2, 2) / total;
            assert!((exd.px[k] - want).abs() < 1e-12, "px[{k}]");
            assert!((exd.py[k] - want).abs() < 1e-12, "py[{k}]");
        }
        assert_eq!(exd.px[0], 0.0);
        assert_eq!(exd.py[0], 0.0);
        let sum: f64 = exd.px.iter().chain(exd.py.iter()).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exit_law_sums_to_one_on_random_environments() {
        for stream in 0..50 {
            let mut rng = RngStream::new(2000, stream);
            let env = build_env(11, 7, params(), &mut rng).unwrap();
            let lat = forward_logz(&env).unwrap();
            let rev = reverse_logw(&env, (11, 7)).unwrap();
            let exd = exit_distribution(&env, &lat, &rev).unwrap();
            let sum: f64 = exd.px.iter().chain(exd.py.iter()).sum();
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(exd.px.iter().chain(exd.py.iter()).all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn degenerate_row_exit_law_and_kernel_sum() {
        let p = ModelParams::new(0.9, 2.0).unwrap();
        let env = Environment::from_boundary_parts(
            p,
            1,
            0,
            vec![0.0, -0.4],
            vec![0.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (1, 0)).unwrap();
        let exd = exit_distribution(&env, &lat, &rev).unwrap();
        assert_eq!(exd.px, vec![0.0, 1.0]);
        assert_eq!(exd.py, vec![0.0]);
        let e = exit_phi_expectation(&env, &exd, Axis::Horizontal).unwrap();
        let want = phi(0.9, libm::exp(0.4));
        assert!((e - want).abs() < 1e-13);
    }

    #[test]
    fn crossing_all_ones_level_two_is_exact() {
        let env = ones_env(4, 4);
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (4, 4)).unwrap();
        let cd = crossing_distribution(2, &lat, &rev).unwrap();
        let want = [5.0, 12.0, 18.0, 20.0, 15.0];
        for (i, w) in want.iter().enumerate() {
            assert!((cd.pv[i] - w / 70.0).abs() < 1e-12, "pv[{i}]");
        }
    }

    #[test]
    fn crossing_level_zero_reproduces_exit_law() {
        let mut rng = RngStream::new(2001, 0);
        let env = build_env(9, 6, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (9, 6)).unwrap();
        let exd = exit_distribution(&env, &lat, &rev).unwrap();
        let cd = crossing_distribution(0, &lat, &rev).unwrap();
        for k in 1..=9 {
            assert!((cd.pv[k] - exd.px[k]).abs() < 1e-12, "pv[{k}] vs px[{k}]");
        }
        let py_total: f64 = exd.py.iter().sum();
        assert!((cd.pv[0] - py_total).abs() < 1e-12);
    }

    #[test]
    fn crossing_laws_normalize_at_every_level() {
        let mut rng = RngStream::new(2002, 0);
        let env = build_env(8, 8, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (8, 8)).unwrap();
        for level in 0..8 {
            let cd = crossing_distribution(level, &lat, &rev).unwrap();
            let sum: f64 = cd.pv.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "level {level}");
        }
        assert!(crossing_distribution(8, &lat, &rev).is_err());
    }

    #[test]
    fn sampled_paths_are_valid_and_uniform_on_all_ones() {
        let env = ones_env(2, 2);
        let lat = forward_logz(&env).unwrap();
        let mut rng = RngStream::new(2003, 0);
        let mut counts = std::collections::HashMap::new();
        let reps = 60_000;
        for _ in 0..reps {
            let path = sample_path(&lat, &env, &mut rng).unwrap();
            assert_eq!(path.points()[0], (0, 0));
            assert_eq!(path.endpoint(), (2, 2));
            *counts.entry(path.points().to_vec()).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let sigma = (reps as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for (_, c) in counts {
            assert!(
                (c as f64 - reps as f64 / 6.0).abs() < 4.0 * sigma,
                "path count {c} too far from uniform"
            );
        }
    }

    #[test]
    fn sampled_paths_follow_exact_law_on_random_environment() {
        let mut rng = RngStream::new(2004, 0);
        let env = build_env(2, 2, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();

        let mut log_probs = std::collections::HashMap::new();
        let paths: [Vec<(usize, usize)>; 6] = [
            vec![(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)],
            vec![(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)],
            vec![(0, 0), (1, 0), (1, 1), (1, 2), (2, 2)],
            vec![(0, 0), (0, 1), (1, 1), (2, 1), (2, 2)],
            vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)],
            vec![(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)],
        ];
        let weight = |i: usize, j: usize| -> f64 {
            if j == 0 {
                env.log_u0(i)
            } else if i == 0 {
                env.log_v0(j)
            } else {
                env.log_y(i, j)
            }
        };
        for p in &paths {
            let mut lw = 0.0;
            for &(i, j) in &p[1..] {
                lw += weight(i, j);
            }
            log_probs.insert(p.clone(), lw - lat.corner());
        }
        let total: f64 = log_probs.values().map(|lw| lw.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let reps = 30_000;
        let mut counts: std::collections::HashMap<_, u32> = std::collections::HashMap::new();
        for _ in 0..reps {
            let path = sample_path(&lat, &env, &mut rng).unwrap();
            *counts.entry(path.points().to_vec()).or_insert(0) += 1;
        }
        let mut stat = 0.0;
        for (p, lw) in &log_probs {
            let expected = reps as f64 * lw.exp();
            let observed = *counts.get(p).unwrap_or(&0) as f64;
            stat += (observed - expected) * (observed - expected) / expected;
        }
        let p_value = 1.0 - chi_square_cdf(stat, 5.0);
        assert!(p_value > 1e-3, "goodness-of-fit rejected: stat {stat}");
    }

    #[test]
    fn sampled_exit_law_matches_exact_law_in_total_variation() {
        let mut rng = RngStream::new(2005, 0);
        let (m, n) = (50, 50);
        let env = build_env(m, n, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (m, n)).unwrap();
        let exd = exit_distribution(&env, &lat, &rev).unwrap();
        let reps = 100_000;
        let mut hx = vec![0.0; m + 1];
        let mut hy = vec![0.0; n + 1];
        for _ in 0..reps {
            let f = path_functionals(&sample_path(&lat, &env, &mut rng).unwrap());
            if f.exit_x > 0 {
                hx[f.exit_x] += 1.0;
            } else {
                hy[f.exit_y] += 1.0;
            }
        }
        let mut tv = 0.0;
        for k in 0..=m {
            tv += (hx[k] / reps as f64 - exd.px[k]).abs();
        }
        for l in 0..=n {
            tv += (hy[l] / reps as f64 - exd.py[l]).abs();
        }
        tv *= 0.5;
        assert!(tv < 0.01, "total variation {tv} too large");
    }

    #[test]
    fn dual_kernel_rows_sum_to_one_and_match_hand_values() {
        let env = ones_env(2, 2);
        let lat = forward_logz(&env).unwrap();
        let dual = dual_weights(&lat, &env).unwrap();
        let p_east = exp(dual.log_x(1, 0) + lat.at(1, 0) - lat.at(2, 0));
        assert!((p_east - 2.0 / 3.0).abs() < 1e-13);

        let mut rng = RngStream::new(2006, 0);
        let env = build_env(6, 5, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let dual = dual_weights(&lat, &env).unwrap();
        for i in 0..6 {
            for j in 0..5 {
                let pe = exp(dual.log_x(i, j) + lat.at(i, j) - lat.at(i + 1, j));
                let pn = exp(dual.log_x(i, j) + lat.at(i, j) - lat.at(i, j + 1));
                assert!((pe + pn - 1.0).abs() < 1e-12, "kernel at ({i}, {j})");
            }
        }
        for j in 0..5 {
            let pn = exp(dual.log_x(6, j) + lat.at(6, j) - lat.at(6, j + 1));
            assert!((pn - 1.0).abs() < 1e-12, "forced north at (6, {j})");
        }
        for i in 0..6 {
            let pe = exp(dual.log_x(i, 5) + lat.at(i, 5) - lat.at(i + 1, 5));
            assert!((pe - 1.0).abs() < 1e-12, "forced east at ({i}, 5)");
        }
    }

    #[test]
    fn dual_paths_are_valid_and_first_step_matches_kernel() {
        let mut rng = RngStream::new(2007, 0);
        let env = build_env(5, 4, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let dual = dual_weights(&lat, &env).unwrap();
        let p_east = exp(dual.log_x(0, 0) + lat.at(0, 0) - lat.at(1, 0));
        let reps = 40_000;
        let mut east = 0u32;
        for _ in 0..reps {
            let path = sample_dual_path(&dual, &lat, &mut rng).unwrap();
            assert_eq!(path.endpoint(), (5, 4));
            if path.points()[1] == (1, 0) {
                east += 1;
            }
        }
        let got = east as f64 / reps as f64;
        let sigma = (p_east * (1.0 - p_east) / reps as f64).sqrt();
        assert!((got - p_east).abs() < 4.0 * sigma, "{got} vs {p_east}");
    }

    #[test]
    fn dual_tail_all_ones_values() {
        let env = ones_env(2, 2);
        let lat = forward_logz(&env).unwrap();
        let dual = dual_weights(&lat, &env).unwrap();
        assert!((dual_exit_x_tail(&dual, &lat, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((dual_exit_x_tail(&dual, &lat, 1).unwrap() - 0.5).abs() < 1e-13);
        assert!((dual_exit_x_tail(&dual, &lat, 2).unwrap() - 1.0 / 3.0).abs() < 1e-13);
        assert!((reversed_exit_x_tail(&lat, &env, 1).unwrap() - 0.5).abs() < 1e-13);
        assert!((reversed_exit_x_tail(&lat, &env, 2).unwrap() - 1.0 / 6.0).abs() < 1e-13);
    }

    /// The distribution of the quenched probability of starting with more
    /// than `k` east steps under the dual measure matches, across
    /// environments, the distribution of ending with more than `k` east
    /// steps under the quenched measure on the reflected rectangle.
    #[test]
    fn dual_and_reversed_exit_probabilities_share_a_law() {
        let (m, n) = (8, 6);
        let reps = 800;
        let mut dual_vals = Vec::with_capacity(reps);
        let mut rev_vals = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = RngStream::new(2008, r as u64);
            let env = build_env(m, n, params(), &mut rng).unwrap();
            let lat = forward_logz(&env).unwrap();
            let dual = dual_weights(&lat, &env).unwrap();
            dual_vals.push(dual_exit_x_tail(&dual, &lat, 2).unwrap());

            let mut rng2 = RngStream::new(2009, r as u64);
            let env2 = build_env(m, n, params(), &mut rng2).unwrap();
            let lat2 = forward_logz(&env2).unwrap();
            rev_vals.push(reversed_exit_x_tail(&lat2, &env2, 2).unwrap());
        }
        let ks = two_sample_ks(&dual_vals, &rev_vals).unwrap();
        assert!(ks.p_value > 1e-3, "dual/reversed tails disagree: {ks:?}");
    }

    /// The law of the probability of exiting strictly east of 0 on an
    /// `m x n` rectangle matches the law of exiting strictly east of 1 on
    /// `(m+1) x n`.
    #[test]
    fn exit_depth_laws_shift_with_the_rectangle() {
        let reps = 800;
        let mut base = Vec::with_capacity(reps);
        let mut shifted = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = RngStream::new(2010, r as u64);
            let env = build_env(8, 6, params(), &mut rng).unwrap();
            let lat = forward_logz(&env).unwrap();
            let rev = reverse_logw(&env, (8, 6)).unwrap();
            let exd = exit_distribution(&env, &lat, &rev).unwrap();
            base.push(exd.px.iter().skip(1).sum::<f64>());

            let mut rng2 = RngStream::new(2011, r as u64);
            let env2 = build_env(9, 6, params(), &mut rng2).unwrap();
            let lat2 = forward_logz(&env2).unwrap();
            let rev2 = reverse_logw(&env2, (9, 6)).unwrap();
            let exd2 = exit_distribution(&env2, &lat2, &rev2).unwrap();
            shifted.push(exd2.px.iter().skip(2).sum::<f64>());
        }
        let ks = two_sample_ks(&base, &shifted).unwrap();
        assert!(ks.p_value > 1e-3, "shifted exit laws disagree: {ks:?}");
    }

    /// Pathwise form of the reversal lemma: the dual probability of opening
    /// with `k` east steps on `env` equals the quenched probability of
    /// closing with `k` east steps on the reversed environment.
    #[test]
    fn dual_tail_equals_reversed_tail_on_star_environment() {
        for stream in 0..20 {
            let mut rng = RngStream::new(2016, stream);
            let env = build_env(6, 5, params(), &mut rng).unwrap();
            let lat = forward_logz(&env).unwrap();
            let dual = dual_weights(&lat, &env).unwrap();
            let star_env = crate::lattice::star_environment(&env, &lat).unwrap();
            let star_lat = forward_logz(&star_env).unwrap();
            for k in [1usize, 2, 5] {
                let lhs = dual_exit_x_tail(&dual, &lat, k).unwrap();
                let rhs = reversed_exit_x_tail(&star_lat, &star_env, k).unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-11,
                    "k={k}: {lhs} vs {rhs} on stream {stream}"
                );
            }
        }
    }

    #[test]
    fn last_step_probability_is_the_corner_ratio() {
        let mut rng = RngStream::new(2012, 0);
        let env = build_env(7, 5, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let p = last_step_probability(&lat).unwrap();
        assert!(p > 0.0 && p < 1.0);
        let zx = lat.at(6, 5) + env.log_y(7, 5) - lat.corner();
        assert!((p - zx.exp()).abs() < 1e-12);
        let exd = exit_distribution(&env, &lat, &reverse_logw(&env, (7, 5)).unwrap()).unwrap();
        let via_tail = reversed_exit_x_tail(&lat, &env, 1).unwrap();
        assert!((p - via_tail).abs() < 1e-12);
        let _ = exd;
    }

    #[test]
    fn path_functionals_on_a_staircase() {
        let path = PolymerPath::from_points(vec![
            (0, 0),
            (1, 0),
            (1, 1),
            (2, 1),
            (2, 2),
            (3, 2),
        ])
        .unwrap();
        let f = path_functionals(&path);
        assert_eq!(f.v_min, vec![0, 1, 2]);
        assert_eq!(f.v_max, vec![1, 2, 3]);
        assert_eq!(f.w_min, vec![0, 0, 1, 2]);
        assert_eq!(f.w_max, vec![0, 1, 2, 2]);
        assert_eq!(f.exit_x, 1);
        assert_eq!(f.exit_y, 0);
        for j in 0..2 {
            assert!(f.v_min[j] <= f.v_max[j]);
            assert!(f.v_max[j] <= f.v_min[j + 1]);
        }
    }

    #[test]
    fn path_validation_rejects_bad_sequences() {
        assert!(PolymerPath::from_points(vec![]).is_err());
        assert!(PolymerPath::from_points(vec![(1, 0)]).is_err());
        assert!(PolymerPath::from_points(vec![(0, 0), (1, 1)]).is_err());
        assert!(PolymerPath::from_points(vec![(0, 0), (0, 1), (0, 0)]).is_err());
    }

    #[test]
    fn quenched_and_dual_exit_means_agree_on_average() {
        let (m, n) = (6, 6);
        let mut quenched_mean = 0.0;
        let mut dual_mean = 0.0;
        let reps = 400;
        for r in 0..reps {
            let mut rng = RngStream::new(2013, r as u64);
            let env = build_env(m, n, params(), &mut rng).unwrap();
            let lat = forward_logz(&env).unwrap();
            let dual = dual_weights(&lat, &env).unwrap();
            quenched_mean += reversed_exit_x_tail(&lat, &env, 1).unwrap();
            dual_mean += dual_exit_x_tail(&dual, &lat, 1).unwrap();
        }
        quenched_mean /= reps as f64;
        dual_mean /= reps as f64;
        assert!(
            (quenched_mean - dual_mean).abs() < 0.05,
            "{quenched_mean} vs {dual_mean}"
        );
    }

    #[test]
    fn operations_reject_mismatched_inputs() {
        let mut rng = RngStream::new(2014, 0);
        let env = build_env(4, 4, params(), &mut rng).unwrap();
        let other = build_env(5, 4, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (4, 4)).unwrap();
        let partial_rev = reverse_logw(&env, (3, 4)).unwrap();
        assert!(exit_distribution(&other, &lat, &rev).is_err());
        assert!(exit_distribution(&env, &lat, &partial_rev).is_err());
        let bulk = bulk_logz(&env, (1, 1)).unwrap();
        assert!(last_step_probability(&bulk).is_err());
        let mut rng_b = RngStream::new(2014, 1);
        let bulk_env = crate::randenv::build_bulk_env(4, 4, 2.0, &mut rng_b).unwrap();
        assert!(sample_path(&lat, &bulk_env, &mut rng).is_err());
        let exd = exit_distribution(&env, &lat, &rev).unwrap();
        assert!(exit_phi_expectation(&bulk_env, &exd, Axis::Horizontal).is_err());
    }

    #[test]
    fn exit_decomposition_terms_match_distribution() {
        let mut rng = RngStream::new(2015, 0);
        let env = build_env(7, 7, params(), &mut rng).unwrap();
        let lat = forward_logz(&env).unwrap();
        let rev = reverse_logw(&env, (7, 7)).unwrap();
        let exd = exit_distribution(&env, &lat, &rev).unwrap();
        let mut terms = Vec::new();
        for k in 1..=7 {
            terms.push(lat.at(k, 0) + rev.at(k, 1));
        }
        for l in 1..=7 {
            terms.push(lat.at(0, l) + rev.at(1, l));
        }
        let log_total = log_sum_exp(&terms);
        assert!((log_total - lat.corner()).abs() < 1e-10);
        for k in 1..=7usize {
            let want = exp(terms[k - 1] - log_total);
            assert!((exd.px[k] - want).abs() < 1e-12);
        }
    }
}
