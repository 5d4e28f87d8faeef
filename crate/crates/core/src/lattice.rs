//! Log-domain partition-function recursions.
//!
//! The forward recursion on a boundary environment computes
//! `Z_{i,j} = Y_{i,j} (Z_{i-1,j} + Z_{i,j-1})` with the axis weights as
//! starting values and `Z_{0,0} = 1`; every sum is taken in the log domain,
//! so rectangles far beyond the overflow range of raw weights are exact to
//! roundoff. The same recursion started inside the bulk gives the
//! boundary-free partition functions `Z^\square`, which include the weight
//! of their starting site.
//!
//! On top of the plain lattices sit the derived fields: horizontal and
//! vertical partition ratios, the dual weights built from them, the
//! reversed lattice that counts path weight from a site to a fixed
//! endpoint, anti-diagonal totals for free-endpoint ensembles, and
//! streaming variants that keep one row in memory while drawing weights on
//! the fly, bit-identical to materializing the environment first.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, log1p};

use crate::randenv::{Environment, RngStream};
use crate::specfun::ModelParams;
use crate::Error;

/// `log(e^a + e^b)` without overflow; propagates negative infinity as the
/// identity element.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// `log(sum of e^{x_k})` over a slice, reduced against the maximum in slice
/// order. Returns negative infinity for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        if x > hi {
            hi = x;
        }
    }
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    let mut acc = 0.0;
    for &x in xs {
        acc += exp(x - hi);
    }
    hi + log(acc)
}

/// Log partition functions on a sub-rectangle `{start_i..m} x {start_j..n}`.
///
/// Lattices rooted at the origin hold the boundary-model values `log Z`;
/// lattices rooted in the bulk hold `log Z^\square`, which include their
/// start weight. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LogZLattice {
    start_i: usize,
    start_j: usize,
    m: usize,
    n: usize,
    logz: Vec<f64>,
}

impl LogZLattice {
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.start_i <= i && i <= self.m && self.start_j <= j && j <= self.n);
        (i - self.start_i) * (self.n - self.start_j + 1) + (j - self.start_j)
    }

    /// Lower-left corner of the covered rectangle.
    pub fn start(&self) -> (usize, usize) {
        (self.start_i, self.start_j)
    }

    /// Horizontal extent of the covered rectangle.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Vertical extent of the covered rectangle.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Log partition function at `(i, j)`. Panics outside the rectangle.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        assert!(
            self.start_i <= i && i <= self.m && self.start_j <= j && j <= self.n,
            "lattice index ({i}, {j}) outside {:?}..({}, {})",
            self.start(),
            self.m,
            self.n
        );
        self.logz[self.idx(i, j)]
    }

    /// Value at the upper-right corner `(m, n)`.
    pub fn corner(&self) -> f64 {
        self.logz[self.idx(self.m, self.n)]
    }
}

/// Forward recursion on a boundary environment over the full rectangle:
/// `log Z_{0,0} = 0`, axis values are prefix sums of axis log weights, and
/// interior cells take `log Y + log(e^{west} + e^{south})`, filled row by
/// row.
pub fn forward_logz(env: &Environment) -> Result<LogZLattice, Error> {
    if !env.has_boundary() {
        return Err(Error::MissingBoundary);
    }
    let (m, n) = (env.m(), env.n());
    let mut lat = LogZLattice {
        start_i: 0,
        start_j: 0,
        m,
        n,
        logz: vec![0.0; (m + 1) * (n + 1)],
    };
    for i in 1..=m {
        let v = lat.at(i - 1, 0) + env.log_u0(i);
        lat.logz[i * (n + 1)] = v;
    }
    for j in 1..=n {
        let v = lat.at(0, j - 1) + env.log_v0(j);
        lat.logz[j] = v;
    }
    for i in 1..=m {
        for j in 1..=n {
            let v = env.log_y(i, j) + log_add_exp(lat.at(i - 1, j), lat.at(i, j - 1));
            lat.logz[i * (n + 1) + j] = v;
        }
    }
    Ok(lat)
}

/// Same recursion as [`forward_logz`] but sweeping anti-diagonals instead
/// of rows. Every cell sees the same two inputs and the same operation, so
/// the result is bit-identical; the sweep order is the one an intra-lattice
/// parallel schedule would use.
pub fn forward_logz_wavefront(env: &Environment) -> Result<LogZLattice, Error> {
    if !env.has_boundary() {
        return Err(Error::MissingBoundary);
    }
    let (m, n) = (env.m(), env.n());
    let mut lat = LogZLattice {
        start_i: 0,
        start_j: 0,
        m,
        n,
        logz: vec![0.0; (m + 1) * (n + 1)],
    };
    for i in 1..=m {
        let v = lat.at(i - 1, 0) + env.log_u0(i);
        lat.logz[i * (n + 1)] = v;
    }
    for j in 1..=n {
        let v = lat.at(0, j - 1) + env.log_v0(j);
        lat.logz[j] = v;
    }
    for d in 2..=(m + n) {
        let lo = if d > n { d - n } else { 1 };
        let hi = core::cmp::min(m, d - 1);
        for i in lo..=hi {
            let j = d - i;
            let v = env.log_y(i, j) + log_add_exp(lat.at(i - 1, j), lat.at(i, j - 1));
            lat.logz[i * (n + 1) + j] = v;
        }
    }
    Ok(lat)
}

/// Boundary-free partition functions `log Z^\square` from `start` to every
/// site northeast of it, including the weight of the start site. `start`
/// must lie in the bulk of the environment's rectangle.
pub fn bulk_logz(env: &Environment, start: (usize, usize)) -> Result<LogZLattice, Error> {
    let (si, sj) = start;
    let (m, n) = (env.m(), env.n());
    if si < 1 || sj < 1 || si > m || sj > n {
        return Err(Error::DimensionMismatch {
            what: "bulk recursion start must lie in the environment bulk",
        });
    }
    let cols = n - sj + 1;
    let mut lat = LogZLattice {
        start_i: si,
        start_j: sj,
        m,
        n,
        logz: vec![0.0; (m - si + 1) * cols],
    };
    lat.logz[0] = env.log_y(si, sj);
    for i in (si + 1)..=m {
        let v = lat.at(i - 1, sj) + env.log_y(i, sj);
        lat.logz[(i - si) * cols] = v;
    }
    for j in (sj + 1)..=n {
        let v = lat.at(si, j - 1) + env.log_y(si, j);
        lat.logz[j - sj] = v;
    }
    for i in (si + 1)..=m {
        for j in (sj + 1)..=n {
            let v = env.log_y(i, j) + log_add_exp(lat.at(i - 1, j), lat.at(i, j - 1));
            lat.logz[(i - si) * cols + (j - sj)] = v;
        }
    }
    Ok(lat)
}

/// Log partition functions from each site to a fixed endpoint.
///
/// `at(i, j)` is the log of the total weight of up-right paths from
/// `(i, j)` to the endpoint, including the weight at `(i, j)` itself (the
/// origin carries weight 1). Built by [`reverse_logw`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseLattice {
    start_i: usize,
    start_j: usize,
    me: usize,
    ne: usize,
    logw: Vec<f64>,
}

impl ReverseLattice {
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.start_i <= i && i <= self.me && self.start_j <= j && j <= self.ne);
        (i - self.start_i) * (self.ne - self.start_j + 1) + (j - self.start_j)
    }

    /// Lower-left corner of the covered rectangle.
    pub fn start(&self) -> (usize, usize) {
        (self.start_i, self.start_j)
    }

    /// Endpoint the paths are counted to.
    pub fn endpoint(&self) -> (usize, usize) {
        (self.me, self.ne)
    }

    /// Log path weight from `(i, j)` to the endpoint, inclusive of `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        assert!(
            self.start_i <= i && i <= self.me && self.start_j <= j && j <= self.ne,
            "reverse lattice index ({i}, {j}) outside {:?}..{:?}",
            self.start(),
            self.endpoint()
        );
        self.logw[self.idx(i, j)]
    }
}

/// Reverse recursion toward `endpoint`: `W_{i,j} = w_{i,j}(W_{i+1,j} +
/// W_{i,j+1})` with `W` at the endpoint equal to the endpoint weight.
///
/// On a boundary environment the rectangle reaches the axes and the origin
/// value reproduces `log Z` to the endpoint; on a bulk-only environment the
/// rectangle starts at `(1, 1)`. The endpoint may be any site of the
/// environment northeast of the start.
pub fn reverse_logw(env: &Environment, endpoint: (usize, usize)) -> Result<ReverseLattice, Error> {
    let (me, ne) = endpoint;
    if me > env.m() || ne > env.n() {
        return Err(Error::DimensionMismatch {
            what: "reverse endpoint outside environment",
        });
    }
    let (si, sj) = if env.has_boundary() { (0, 0) } else { (1, 1) };
    if me < si || ne < sj {
        return Err(Error::DimensionMismatch {
            what: "reverse endpoint southwest of lattice start",
        });
    }
    let weight = |i: usize, j: usize| -> f64 {
        if i == 0 && j == 0 {
            0.0
        } else if j == 0 {
            env.log_u0(i)
        } else if i == 0 {
            env.log_v0(j)
        } else {
            env.log_y(i, j)
        }
    };
    let cols = ne - sj + 1;
    let mut rev = ReverseLattice {
        start_i: si,
        start_j: sj,
        me,
        ne,
        logw: vec![0.0; (me - si + 1) * cols],
    };
    rev.logw[(me - si) * cols + (ne - sj)] = weight(me, ne);
    for i in (si..me).rev() {
        let v = rev.at(i + 1, ne) + weight(i, ne);
        rev.logw[(i - si) * cols + (ne - sj)] = v;
    }
    for j in (sj..ne).rev() {
        let v = rev.at(me, j + 1) + weight(me, j);
        rev.logw[(me - si) * cols + (j - sj)] = v;
    }
    for i in (si..me).rev() {
        for j in (sj..ne).rev() {
            let v = weight(i, j) + log_add_exp(rev.at(i + 1, j), rev.at(i, j + 1));
            rev.logw[(i - si) * cols + (j - sj)] = v;
        }
    }
    Ok(rev)
}

/// Nearest-neighbor log partition ratios of a lattice: horizontal
/// `log U = log Z_{i,j} - log Z_{i-1,j}` and vertical
/// `log V = log Z_{i,j} - log Z_{i,j-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioFields {
    start_i: usize,
    start_j: usize,
    m: usize,
    n: usize,
    log_u: Vec<f64>,
    log_v: Vec<f64>,
}

impl RatioFields {
    /// Horizontal ratio at `(i, j)`, defined for `i > start_i`.
    pub fn log_u(&self, i: usize, j: usize) -> f64 {
        assert!(
            self.start_i < i && i <= self.m && self.start_j <= j && j <= self.n,
            "ratio index ({i}, {j}) invalid for horizontal ratios"
        );
        self.log_u[(i - self.start_i - 1) * (self.n - self.start_j + 1) + (j - self.start_j)]
    }

    /// Vertical ratio at `(i, j)`, defined for `j > start_j`.
    pub fn log_v(&self, i: usize, j: usize) -> f64 {
        assert!(
            self.start_i <= i && i <= self.m && self.start_j < j && j <= self.n,
            "ratio index ({i}, {j}) invalid for vertical ratios"
        );
        self.log_v[(i - self.start_i) * (self.n - self.start_j) + (j - self.start_j - 1)]
    }
}

/// Extracts both ratio fields from a lattice.
pub fn ratio_fields(lat: &LogZLattice) -> RatioFields {
    let (si, sj) = lat.start();
    let (m, n) = (lat.m(), lat.n());
    let mut log_u = Vec::with_capacity((m - si) * (n - sj + 1));
    for i in (si + 1)..=m {
        for j in sj..=n {
            log_u.push(lat.at(i, j) - lat.at(i - 1, j));
        }
    }
    let mut log_v = Vec::with_capacity((m - si + 1) * (n - sj));
    for i in si..=m {
        for j in (sj + 1)..=n {
            log_v.push(lat.at(i, j) - lat.at(i, j - 1));
        }
    }
    RatioFields {
        start_i: si,
        start_j: sj,
        m,
        n,
        log_u,
        log_v,
    }
}

/// Dual weights of an origin-rooted lattice.
///
/// At interior sites the dual weight is
/// `X_{i,j} = (U_{i+1,j}^{-1} + V_{i,j+1}^{-1})^{-1}`; along the north edge
/// it degenerates to `U_{i+1,n}` and along the east edge to `V_{m,j+1}`,
/// which makes the dual path kernel put probability one on the forced step.
/// The slot at `(m, n)` is NaN: no dual weight lives at the endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWeights {
    m: usize,
    n: usize,
    logx: Vec<f64>,
}

impl DualWeights {
    /// Rectangle extent.
    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Log dual weight at `(i, j)`; panics at `(m, n)` or out of range.
    pub fn log_x(&self, i: usize, j: usize) -> f64 {
        assert!(
            i <= self.m && j <= self.n && !(i == self.m && j == self.n),
            "dual weight index ({i}, {j}) out of range"
        );
        self.logx[i * (self.n + 1) + j]
    }
}

/// Builds the dual weight field of an origin-rooted lattice. The
/// environment is only consulted for shape agreement.
pub fn dual_weights(lat: &LogZLattice, env: &Environment) -> Result<DualWeights, Error> {
    if lat.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "dual weights need an origin-rooted lattice",
        });
    }
    if lat.m() != env.m() || lat.n() != env.n() {
        return Err(Error::DimensionMismatch {
            what: "lattice and environment shapes disagree",
        });
    }
    let (m, n) = (lat.m(), lat.n());
    let ratios = ratio_fields(lat);
    let mut logx = vec![f64::NAN; (m + 1) * (n + 1)];
    for i in 0..=m {
        for j in 0..=n {
            if i == m && j == n {
                continue;
            }
            logx[i * (n + 1) + j] = if i == m {
                ratios.log_v(m, j + 1)
            } else if j == n {
                ratios.log_u(i + 1, n)
            } else {
                -log_add_exp(-ratios.log_u(i + 1, j), -ratios.log_v(i, j + 1))
            };
        }
    }
    Ok(DualWeights { m, n, logx })
}

/// Reversed lattice: `log Z*_{i,j} = log Z_{m,n} - log Z_{m-i,n-j}` on an
/// origin-rooted lattice. The map is an involution and fixes the corner
/// value, and the result satisfies the forward recursion in the dual
/// weights reflected through the rectangle center.
pub fn star_lattice(lat: &LogZLattice) -> Result<LogZLattice, Error> {
    if lat.start() != (0, 0) {
        return Err(Error::DimensionMismatch {
            what: "reversal needs an origin-rooted lattice",
        });
    }
    let (m, n) = (lat.m(), lat.n());
    let corner = lat.corner();
    let mut logz = Vec::with_capacity((m + 1) * (n + 1));
    for i in 0..=m {
        for j in 0..=n {
            logz.push(corner - lat.at(m - i, n - j));
        }
    }
    Ok(LogZLattice {
        start_i: 0,
        start_j: 0,
        m,
        n,
        logz,
    })
}

/// Builds the reversed environment: its axis weights are the ratio
/// variables along the north and east edges read backward, and its bulk
/// weights are the dual weights reflected through the rectangle's center.
/// The forward lattice of the result equals [`star_lattice`] of the
/// original, so in particular both share the corner value bitwise.
pub fn star_environment(env: &Environment, lat: &LogZLattice) -> Result<Environment, Error> {
    let params = env.params().ok_or(Error::MissingBoundary)?;
    if lat.start() != (0, 0) || lat.m() != env.m() || lat.n() != env.n() {
        return Err(Error::DimensionMismatch {
            what: "reversal needs the environment's origin-rooted lattice",
        });
    }
    let (m, n) = (env.m(), env.n());
    let ratios = ratio_fields(lat);
    let dual = dual_weights(lat, env)?;
    let mut log_u0 = vec![0.0; m + 1];
    for i in 1..=m {
        log_u0[i] = ratios.log_u(m - i + 1, n);
    }
    let mut log_v0 = vec![0.0; n + 1];
    for j in 1..=n {
        log_v0[j] = ratios.log_v(m, n - j + 1);
    }
    let mut log_y = vec![0.0; (m + 1) * (n + 1)];
    for i in 1..=m {
        for j in 1..=n {
            log_y[i * (n + 1) + j] = dual.log_x(m - i, n - j);
        }
    }
    Environment::from_boundary_parts(params, m, n, log_u0, log_v0, log_y)
}

/// Which ensemble an anti-diagonal total ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TotalMode {
    /// Boundary model on a square `N x N` environment: endpoints
    /// `(l, N - l)` for `l = 0..=N`.
    Boundary,
    /// Bulk model started at `(1, 1)` on a square environment with
    /// `m = n = N - 1`: endpoints `(k, N - k)` for `k = 1..=N-1`.
    Bulk,
}

/// Log of the total partition function of the free-endpoint ensemble on
/// the anti-diagonal line `i + j = N`, where `N = m` in boundary mode and
/// `N = m + 1` in bulk mode. Requires a square environment.
pub fn total_logz(env: &Environment, mode: TotalMode) -> Result<f64, Error> {
    if env.m() != env.n() {
        return Err(Error::DimensionMismatch {
            what: "anti-diagonal totals need a square environment",
        });
    }
    match mode {
        TotalMode::Boundary => {
            let lat = forward_logz(env)?;
            let n_total = env.m();
            let terms: Vec<f64> = (0..=n_total).map(|l| lat.at(l, n_total - l)).collect();
            Ok(log_sum_exp(&terms))
        }
        TotalMode::Bulk => {
            let lat = bulk_logz(env, (1, 1))?;
            let n_total = env.m() + 1;
            let terms: Vec<f64> = (1..n_total).map(|k| lat.at(k, n_total - k)).collect();
            Ok(log_sum_exp(&terms))
        }
    }
}

/// Corner value of [`forward_logz`] on an environment drawn on the fly,
/// holding one row of the recursion in memory. Draw order matches
/// [`crate::randenv::build_env`], so for equal seeds the result is
/// bit-identical to materializing the environment first.
pub fn streaming_corner_boundary(
    m: usize,
    n: usize,
    params: ModelParams,
    rng: &mut RngStream,
) -> Result<f64, Error> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            what: "environment dimensions must be at least 1",
        });
    }
    let mut u_prefix = vec![0.0; m + 1];
    for i in 1..=m {
        u_prefix[i] = u_prefix[i - 1] - log(rng.sample_gamma(params.theta()));
    }
    let mut row = vec![0.0; n + 1];
    for j in 1..=n {
        row[j] = row[j - 1] - log(rng.sample_gamma(params.v_shape()));
    }
    for i in 1..=m {
        row[0] = u_prefix[i];
        for j in 1..=n {
            let log_y = -log(rng.sample_gamma(params.mu()));
            row[j] = log_y + log_add_exp(row[j], row[j - 1]);
        }
    }
    Ok(row[n])
}

/// Corner value of [`bulk_logz`] from `(1, 1)` on an environment drawn on
/// the fly; draw order matches [`crate::randenv::build_bulk_env`].
pub fn streaming_corner_bulk(
    m: usize,
    n: usize,
    mu: f64,
    rng: &mut RngStream,
) -> Result<f64, Error> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            what: "environment dimensions must be at least 1",
        });
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "bulk environment requires finite mu > 0",
        });
    }
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    row[0] = 0.0;
    for i in 1..=m {
        if i > 1 {
            row[0] = f64::NEG_INFINITY;
        }
        for j in 1..=n {
            let log_y = -log(rng.sample_gamma(mu));
            row[j] = if i == 1 && j == 1 {
                log_y
            } else {
                log_y + log_add_exp(row[j], row[j - 1])
            };
        }
    }
    Ok(row[n])
}

/// Anti-diagonal values of the boundary model at scale `n_total`: the
/// vector of `log Z_{l, N-l}` for `l = 0..=N`, streamed row by row over a
/// square `N x N` environment drawn on the fly. Draw order matches
/// [`crate::randenv::build_env`].
pub fn streaming_antidiagonal_boundary(
    n_total: usize,
    params: ModelParams,
    rng: &mut RngStream,
) -> Result<Vec<f64>, Error> {
    if n_total == 0 {
        return Err(Error::InvalidParameter {
            what: "anti-diagonal scale must be at least 1",
        });
    }
    let big_n = n_total;
    let mut u_prefix = vec![0.0; big_n + 1];
    for i in 1..=big_n {
        u_prefix[i] = u_prefix[i - 1] - log(rng.sample_gamma(params.theta()));
    }
    let mut row = vec![0.0; big_n + 1];
    for j in 1..=big_n {
        row[j] = row[j - 1] - log(rng.sample_gamma(params.v_shape()));
    }
    let mut out = vec![0.0; big_n + 1];
    out[0] = row[big_n];
    for i in 1..=big_n {
        row[0] = u_prefix[i];
        for j in 1..=big_n {
            let log_y = -log(rng.sample_gamma(params.mu()));
            row[j] = log_y + log_add_exp(row[j], row[j - 1]);
        }
        out[i] = row[big_n - i];
    }
    Ok(out)
}

/// Anti-diagonal values of the bulk model started at `(1, 1)` at scale
/// `n_total`: the vector of `log Z^\square` from `(1, 1)` to `(k, N-k)`
/// for `k = 1..=N-1` (index `k - 1`), streamed over a square environment
/// with `m = n = N - 1`. Draw order matches
/// [`crate::randenv::build_bulk_env`].
pub fn streaming_antidiagonal_bulk(
    n_total: usize,
    mu: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>, Error> {
    if n_total < 2 {
        return Err(Error::InvalidParameter {
            what: "anti-diagonal scale must be at least 2 in bulk mode",
        });
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "bulk environment requires finite mu > 0",
        });
    }
    let side = n_total - 1;
    let mut row = vec![f64::NEG_INFINITY; side + 1];
    row[0] = 0.0;
    let mut out = vec![0.0; side];
    for i in 1..=side {
        if i > 1 {
            row[0] = f64::NEG_INFINITY;
        }
        for j in 1..=side {
            let log_y = -log(rng.sample_gamma(mu));
            row[j] = if i == 1 && j == 1 {
                log_y
            } else {
                log_y + log_add_exp(row[j], row[j - 1])
            };
        }
        out[i - 1] = row[n_total - i];
    }
    Ok(out)
}
