//! Reproducible random weight environments.
//!
//! A weight environment on the rectangle `{0..m} x {0..n}` stores log
//! weights: `log_u0` on the horizontal axis, `log_v0` on the vertical axis,
//! and `log_y` in the bulk. Reciprocal weights are gamma distributed with
//! shapes `theta`, `mu - theta`, and `mu`; a bulk-only environment has no
//! axis weights and every reciprocal bulk weight has shape `mu`.
//!
//! Randomness comes from [`RngStream`], a counter-based ChaCha8 generator
//! keyed by a master seed and a stream id. Distinct stream ids yield
//! independent streams of the same master key, so replicas can be assigned
//! streams and run in any order, on any number of threads, with identical
//! output. Draw order inside [`build_env`] is part of the reproducibility
//! contract: `log_u0[1..=m]` first, then `log_v0[1..=n]`, then `log_y`
//! row by row with the column index innermost.

use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, log, pow, sqrt};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::specfun::ModelParams;
use crate::Error;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic random stream: ChaCha8 keyed by a master seed, with the
/// stream id selecting one of 2^64 independent substreams of the key.
#[derive(Debug, Clone)]
pub struct RngStream {
    chacha: ChaCha8Rng,
    master_seed: u64,
    stream_id: u64,
}

impl RngStream {
    /// Creates the stream `stream_id` of the generator keyed by
    /// `master_seed`. The 256-bit key is expanded from the seed with
    /// splitmix64 so that nearby seeds still produce unrelated keys.
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut state = master_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut chacha = ChaCha8Rng::from_seed(key);
        chacha.set_stream(stream_id);
        Self {
            chacha,
            master_seed,
            stream_id,
        }
    }

    /// Master seed the stream was keyed with.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Stream id within the master key.
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Next raw word from the generator.
    pub fn next_u64(&mut self) -> u64 {
        self.chacha.next_u64()
    }

    /// Uniform draw on the half-open interval (0, 1]: 53 random bits mapped
    /// to `(k + 1) * 2^{-53}`. Never returns 0, so logarithms of draws are
    /// always finite.
    pub fn uniform_open01(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw by the Box-Muller map, one cosine branch per
    /// draw (no cached second value, keeping replay trivially aligned).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_open01();
        let u2 = self.uniform_open01();
        sqrt(-2.0 * log(u1)) * cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Gamma(shape, 1) draw by the Marsaglia-Tsang squeeze method, with the
    /// boost `G_a = G_{a+1} U^{1/a}` for shapes below 1. Returns NaN for a
    /// non-positive or non-finite shape.
    pub fn sample_gamma(&mut self, shape: f64) -> f64 {
        if !shape.is_finite() || shape <= 0.0 {
            return f64::NAN;
        }
        if shape < 1.0 {
            let g = self.sample_gamma(shape + 1.0);
            let u = self.uniform_open01();
            return g * pow(u, 1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / sqrt(9.0 * d);
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v3 = v * v * v;
            let u = self.uniform_open01();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v3;
            }
            if log(u) < 0.5 * x * x + d * (1.0 - v3 + log(v3)) {
                return d * v3;
            }
        }
    }
}

/// Log-weight environment on `{0..m} x {0..n}`.
///
/// `log_u0[i]` is the log weight at `(i, 0)` for `1 <= i <= m`, `log_v0[j]`
/// the log weight at `(0, j)` for `1 <= j <= n`, and `log_y(i, j)` the bulk
/// log weight for `i, j >= 1`. The origin carries no weight. Bulk-only
/// environments have no axis weights at all; operations that need them
/// return [`Error::MissingBoundary`].
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    m: usize,
    n: usize,
    log_u0: Vec<f64>,
    log_v0: Vec<f64>,
    log_y: Vec<f64>,
    params: Option<ModelParams>,
    mu: f64,
    master_seed: u64,
    stream_id: u64,
}

impl Environment {
    /// Horizontal extent.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Vertical extent.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether axis weights are present.
    pub fn has_boundary(&self) -> bool {
        self.params.is_some()
    }

    /// Model parameters, absent for bulk-only environments.
    pub fn params(&self) -> Option<ModelParams> {
        self.params
    }

    /// Shape of the reciprocal bulk weights.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Master seed recorded at construction (0 for hand-built environments).
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Stream id recorded at construction (0 for hand-built environments).
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Log weight at `(i, 0)`, `1 <= i <= m`. Panics on a bulk-only
    /// environment or out of range.
    pub fn log_u0(&self, i: usize) -> f64 {
        assert!(self.has_boundary(), "bulk-only environment has no axis weights");
        assert!(1 <= i && i <= self.m, "log_u0 index {i} out of 1..={}", self.m);
        self.log_u0[i]
    }

    /// Log weight at `(0, j)`, `1 <= j <= n`. Panics on a bulk-only
    /// environment or out of range.
    pub fn log_v0(&self, j: usize) -> f64 {
        assert!(self.has_boundary(), "bulk-only environment has no axis weights");
        assert!(1 <= j && j <= self.n, "log_v0 index {j} out of 1..={}", self.n);
        self.log_v0[j]
    }

    /// Bulk log weight at `(i, j)`, `i, j >= 1`.
    pub fn log_y(&self, i: usize, j: usize) -> f64 {
        assert!(
            1 <= i && i <= self.m && 1 <= j && j <= self.n,
            "log_y index ({i}, {j}) out of range"
        );
        self.log_y[i * (self.n + 1) + j]
    }

    /// Builds a boundary environment from explicit log weights.
    ///
    /// `log_u0` must have length `m + 1` and `log_v0` length `n + 1` (index
    /// 0 is ignored), `log_y` length `(m + 1) * (n + 1)` in row-major order
    /// with the column index fastest (entries with `i = 0` or `j = 0` are
    /// ignored). Degenerate rectangles with `m = 0` or `n = 0` are allowed.
    pub fn from_boundary_parts(
        params: ModelParams,
        m: usize,
        n: usize,
        log_u0: Vec<f64>,
        log_v0: Vec<f64>,
        log_y: Vec<f64>,
    ) -> Result<Self, Error> {
        if log_u0.len() != m + 1 || log_v0.len() != n + 1 || log_y.len() != (m + 1) * (n + 1) {
            return Err(Error::DimensionMismatch {
                what: "environment part lengths must match the rectangle",
            });
        }
        let env = Self {
            m,
            n,
            log_u0,
            log_v0,
            log_y,
            params: Some(params),
            mu: params.mu(),
            master_seed: 0,
            stream_id: 0,
        };
        env.check_finite()?;
        Ok(env)
    }

    /// Builds a bulk-only environment from explicit log weights; layout as
    /// in [`Environment::from_boundary_parts`].
    pub fn from_bulk_parts(mu: f64, m: usize, n: usize, log_y: Vec<f64>) -> Result<Self, Error> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidParameter {
                what: "bulk environment requires finite mu > 0",
            });
        }
        if log_y.len() != (m + 1) * (n + 1) {
            return Err(Error::DimensionMismatch {
                what: "environment part lengths must match the rectangle",
            });
        }
        let env = Self {
            m,
            n,
            log_u0: vec![0.0; m + 1],
            log_v0: vec![0.0; n + 1],
            log_y,
            params: None,
            mu,
            master_seed: 0,
            stream_id: 0,
        };
        env.check_finite()?;
        Ok(env)
    }

    fn check_finite(&self) -> Result<(), Error> {
        let stride = self.n + 1;
        for i in 1..=self.m {
            if self.has_boundary() && !self.log_u0[i].is_finite() {
                return Err(Error::NumericalFailure {
                    what: "non-finite axis weight",
                    residual: self.log_u0[i],
                });
            }
            for j in 1..=self.n {
                if !self.log_y[i * stride + j].is_finite() {
                    return Err(Error::NumericalFailure {
                        what: "non-finite bulk weight",
                        residual: self.log_y[i * stride + j],
                    });
                }
            }
        }
        for j in 1..=self.n {
            if self.has_boundary() && !self.log_v0[j].is_finite() {
                return Err(Error::NumericalFailure {
                    what: "non-finite axis weight",
                    residual: self.log_v0[j],
                });
            }
        }
        Ok(())
    }

    /// Shifts every horizontal axis log weight down by `delta` and every
    /// vertical axis log weight up by `delta`, leaving the bulk untouched.
    ///
    /// This is the monotone coupling device: on the perturbed environment
    /// every horizontal partition ratio is smaller and every vertical one
    /// larger, deterministically. Requires a boundary environment and
    /// `delta >= 0`.
    pub fn perturb_boundary_ordered(&self, delta: f64) -> Result<Self, Error> {
        if !self.has_boundary() {
            return Err(Error::MissingBoundary);
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter {
                what: "boundary perturbation requires finite delta >= 0",
            });
        }
        let mut out = self.clone();
        for i in 1..=self.m {
            out.log_u0[i] -= delta;
        }
        for j in 1..=self.n {
            out.log_v0[j] += delta;
        }
        Ok(out)
    }
}

/// Draws a boundary environment on `{0..m} x {0..n}`: reciprocal horizontal
/// axis weights Gamma(theta, 1), reciprocal vertical axis weights
/// Gamma(mu - theta, 1), reciprocal bulk weights Gamma(mu, 1), all
/// independent. Requires `m, n >= 1`.
pub fn build_env(
    m: usize,
    n: usize,
    params: ModelParams,
    rng: &mut RngStream,
) -> Result<Environment, Error> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            what: "environment dimensions must be at least 1",
        });
    }
    let mut log_u0 = vec![0.0; m + 1];
    let mut log_v0 = vec![0.0; n + 1];
    let mut log_y = vec![0.0; (m + 1) * (n + 1)];
    for entry in log_u0.iter_mut().skip(1) {
        *entry = -log(rng.sample_gamma(params.theta()));
    }
    for entry in log_v0.iter_mut().skip(1) {
        *entry = -log(rng.sample_gamma(params.v_shape()));
    }
    for i in 1..=m {
        for j in 1..=n {
            log_y[i * (n + 1) + j] = -log(rng.sample_gamma(params.mu()));
        }
    }
    Ok(Environment {
        m,
        n,
        log_u0,
        log_v0,
        log_y,
        params: Some(params),
        mu: params.mu(),
        master_seed: rng.master_seed(),
        stream_id: rng.stream_id(),
    })
}

/// Draws a bulk-only environment: every reciprocal bulk weight Gamma(mu, 1),
/// no axis weights. Draw order matches the bulk block of [`build_env`].
pub fn build_bulk_env(
    m: usize,
    n: usize,
    mu: f64,
    rng: &mut RngStream,
) -> Result<Environment, Error> {
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
    let mut log_y = vec![0.0; (m + 1) * (n + 1)];
    for i in 1..=m {
        for j in 1..=n {
            log_y[i * (n + 1) + j] = -log(rng.sample_gamma(mu));
        }
    }
    Ok(Environment {
        m,
        n,
        log_u0: vec![0.0; m + 1],
        log_v0: vec![0.0; n + 1],
        log_y,
        params: None,
        mu,
        master_seed: rng.master_seed(),
        stream_id: rng.stream_id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{gamma_p, ks_test, McSummary};

    #[test]
    fn streams_replay_bit_for_bit() {
        let mut a = RngStream::new(0xabcd_1234, 7);
        let mut b = RngStream::new(0xabcd_1234, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::new(0xabcd_1234, 7);
        let mut d = RngStream::new(0xabcd_1234, 7);
        for _ in 0..100 {
            assert_eq!(c.sample_gamma(0.77).to_bits(), d.sample_gamma(0.77).to_bits());
        }
    }

    #[test]
    fn distinct_streams_and_seeds_disagree() {
        let mut base = RngStream::new(1, 0);
        let mut other_stream = RngStream::new(1, 1);
        let mut other_seed = RngStream::new(2, 0);
        let a: Vec<u64> = (0..64).map(|_| base.next_u64()).collect();
        let b: Vec<u64> = (0..64).map(|_| other_stream.next_u64()).collect();
        let c: Vec<u64> = (0..64).map(|_| other_seed.next_u64()).collect();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn uniform_lies_in_half_open_interval() {
        let mut rng = RngStream::new(3, 0);
        let mut acc = McSummary::new();
        for _ in 0..1_000_000 {
            let u = rng.uniform_open01();
            assert!(u > 0.0 && u <= 1.0);
            acc.push(u);
        }
        let n = acc.count() as f64;
        assert!((acc.mean() - 0.5).abs() < 4.0 / (12.0 * n).sqrt());
        assert!((acc.variance() - 1.0 / 12.0).abs() < 1e-3);
    }

    #[test]
    fn normal_moments_match() {
        let mut rng = RngStream::new(4, 0);
        let mut acc = McSummary::new();
        for _ in 0..1_000_000 {
            acc.push(rng.standard_normal());
        }
        let n = acc.count() as f64;
        assert!(acc.mean().abs() < 4.0 / n.sqrt());
        assert!((acc.variance() - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!(acc.central3().abs() < 4.0 * (6.0 / n).sqrt());
        assert!((acc.central4() - 3.0).abs() < 4.0 * (96.0 / n).sqrt());
    }

    #[test]
    fn gamma_moments_match_for_all_shape_regimes() {
        for shape in [0.3, 0.5, 1.0, 2.0, 30.0] {
            let mut rng = RngStream::new(5, 0);
            let mut acc = McSummary::new();
            for _ in 0..400_000 {
                acc.push(rng.sample_gamma(shape));
            }
            let n = acc.count() as f64;
            let mean_sd = (shape / n).sqrt();
            assert!(
                (acc.mean() - shape).abs() < 4.0 * mean_sd,
                "gamma mean off at shape {shape}: {}",
                acc.mean()
            );
            assert!(
                (acc.variance() - shape).abs() < 5.0 * acc.stderr_variance(),
                "gamma variance off at shape {shape}: {}",
                acc.variance()
            );
        }
    }

    #[test]
    fn gamma_distribution_passes_ks() {
        let mut rng = RngStream::new(6, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample_gamma(1.3)).collect();
        let ks = ks_test(&xs, |x| gamma_p(1.3, x)).unwrap();
        assert!(ks.p_value > 1e-3, "gamma sampler rejected: {ks:?}");
        let ys: Vec<f64> = (0..10_000).map(|_| rng.sample_gamma(0.6)).collect();
        let ks2 = ks_test(&ys, |x| gamma_p(0.6, x)).unwrap();
        assert!(ks2.p_value > 1e-3, "boosted gamma sampler rejected: {ks2:?}");
    }

    #[test]
    fn log_gamma_moments_match_polygamma() {
        let mut rng = RngStream::new(7, 0);
        let mut acc = McSummary::new();
        for _ in 0..1_000_000 {
            acc.push(log(rng.sample_gamma(0.5)));
        }
        assert!((acc.mean() - crate::specfun::digamma(0.5)).abs() < 0.01);
        assert!((acc.variance() - crate::specfun::trigamma(0.5)).abs() < 0.05);
    }

    #[test]
    fn build_env_is_deterministic_and_layout_stable() {
        let params = ModelParams::new(0.8, 2.1).unwrap();
        let mut rng1 = RngStream::new(99, 3);
        let mut rng2 = RngStream::new(99, 3);
        let a = build_env(5, 4, params, &mut rng1).unwrap();
        let b = build_env(5, 4, params, &mut rng2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.master_seed(), 99);
        assert_eq!(a.stream_id(), 3);
        assert!(a.has_boundary());
        assert_eq!(a.params().unwrap().theta(), 0.8);

        let mut rng3 = RngStream::new(99, 3);
        assert_eq!(a.log_u0(1).to_bits(), (-log(rng3.sample_gamma(0.8))).to_bits());
    }

    #[test]
    fn axis_weight_means_match_digamma() {
        let params = ModelParams::new(1.0, 2.0).unwrap();
        let mut rng = RngStream::new(8, 0);
        let mut acc = McSummary::new();
        for _ in 0..1_000 {
            let env = build_env(100, 1, params, &mut rng).unwrap();
            for i in 1..=100 {
                acc.push(env.log_u0(i));
            }
        }
        assert!(
            (acc.mean() - 0.5772156649015329).abs() < 0.01,
            "mean log axis weight {} should be near Euler's constant",
            acc.mean()
        );
    }

    #[test]
    fn bulk_env_weights_match_digamma() {
        let mut rng = RngStream::new(9, 0);
        let env = build_bulk_env(300, 300, 2.0, &mut rng).unwrap();
        let mut acc = McSummary::new();
        for i in 1..=300 {
            for j in 1..=300 {
                acc.push(env.log_y(i, j));
            }
        }
        assert!(!env.has_boundary());
        assert!((acc.mean() + crate::specfun::digamma(2.0)).abs() < 0.01);
    }

    #[test]
    fn axis_and_bulk_weights_are_uncorrelated() {
        let params = ModelParams::new(0.9, 2.0).unwrap();
        let mut cov = crate::stats::CovAccum::new();
        for stream in 0..4000 {
            let mut rng = RngStream::new(10, stream);
            let env = build_env(2, 2, params, &mut rng).unwrap();
            cov.push(env.log_u0(1), env.log_y(1, 1));
        }
        assert!(cov.correlation().abs() < 4.0 / (cov.count() as f64).sqrt());
    }

    #[test]
    fn perturbation_orders_axis_weights() {
        let params = ModelParams::new(0.9, 2.0).unwrap();
        let mut rng = RngStream::new(11, 0);
        let env = build_env(6, 5, params, &mut rng).unwrap();
        let tilted = env.perturb_boundary_ordered(0.7).unwrap();
        for i in 1..=6 {
            assert!((tilted.log_u0(i) - (env.log_u0(i) - 0.7)).abs() < 1e-15);
        }
        for j in 1..=5 {
            assert!((tilted.log_v0(j) - (env.log_v0(j) + 0.7)).abs() < 1e-15);
        }
        for i in 1..=6 {
            for j in 1..=5 {
                assert_eq!(tilted.log_y(i, j).to_bits(), env.log_y(i, j).to_bits());
            }
        }
        let same = env.perturb_boundary_ordered(0.0).unwrap();
        assert_eq!(same, env);
        assert!(env.perturb_boundary_ordered(-1.0).is_err());

        let mut rng2 = RngStream::new(11, 1);
        let bulk = build_bulk_env(3, 3, 2.0, &mut rng2).unwrap();
        assert_eq!(bulk.perturb_boundary_ordered(0.1), Err(Error::MissingBoundary));
    }

    #[test]
    fn constructors_validate_input() {
        let params = ModelParams::new(1.0, 2.0).unwrap();
        let mut rng = RngStream::new(12, 0);
        assert!(build_env(0, 3, params, &mut rng).is_err());
        assert!(build_bulk_env(3, 3, -1.0, &mut rng).is_err());
        assert!(Environment::from_boundary_parts(
            params,
            2,
            2,
            vec![0.0; 2],
            vec![0.0; 3],
            vec![0.0; 9]
        )
        .is_err());
        assert!(Environment::from_boundary_parts(
            params,
            2,
            2,
            vec![0.0, f64::INFINITY, 0.0],
            vec![0.0; 3],
            vec![0.0; 9]
        )
        .is_err());
        let ones = Environment::from_boundary_parts(
            params,
            2,
            2,
            vec![0.0; 3],
            vec![0.0; 3],
            vec![0.0; 9],
        )
        .unwrap();
        assert_eq!(ones.log_y(2, 2), 0.0);
        assert_eq!(ones.master_seed(), 0);
        let degenerate = Environment::from_boundary_parts(
            params,
            1,
            0,
            vec![0.0, -0.3],
            vec![0.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(degenerate.n(), 0);
        assert_eq!(degenerate.log_u0(1), -0.3);
    }

    #[test]
    fn environments_stay_finite() {
        let params = ModelParams::new(0.2, 0.5).unwrap();
        for stream in 0..200 {
            let mut rng = RngStream::new(13, stream);
            let env = build_env(4, 4, params, &mut rng).unwrap();
            for i in 1..=4 {
                assert!(env.log_u0(i).is_finite());
                assert!(env.log_v0(i).is_finite());
                for j in 1..=4 {
                    assert!(env.log_y(i, j).is_finite());
                }
            }
        }
    }
}
