//! Estimator and test kernels shared by the simulation drivers: streaming
//! moment accumulators, Kolmogorov-Smirnov tests, least-squares slopes, and
//! the reference distribution functions they are compared against.
//!
//! Accumulators are single-pass and numerically stable, so replica results
//! can be merged in any grouping without changing the outcome beyond
//! floating-point roundoff of the merge order actually used.

use alloc::vec::Vec;

use libm::{erfc, exp, fabs, lgamma, log, sqrt};

use crate::Error;

/// Streaming accumulator for the first four central moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct McSummary {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl McSummary {
    /// An empty summary.
    pub fn new() -> Self {
        Self::default()
    }

    /// Absorbs one observation.
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term;
    }

    /// Number of observations absorbed.
    pub fn count(&self) -> u64 {
        self.n
    }

    /// Sample mean.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2 / (self.n as f64 - 1.0)
    }

    /// Standard error of the sample mean.
    pub fn stderr_mean(&self) -> f64 {
        sqrt(self.variance() / self.n as f64)
    }

    /// Third central moment (biased, moment form).
    pub fn central3(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.m3 / self.n as f64
    }

    /// Fourth central moment (biased, moment form).
    pub fn central4(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.m4 / self.n as f64
    }

    /// Standard error of the sample variance,
    /// `sqrt((mu4 - sigma^4 (n-3)/(n-1)) / n)`.
    pub fn stderr_variance(&self) -> f64 {
        if self.n < 4 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let var = self.variance();
        let inner = self.central4() - var * var * (n - 3.0) / (n - 1.0);
        sqrt(inner.max(0.0) / n)
    }
}

/// Streaming accumulator for the covariance and correlation of paired
/// observations.
#[derive(Debug, Clone, Copy, Default)]
pub struct CovAccum {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    c_xy: f64,
    m2_x: f64,
    m2_y: f64,
}

impl CovAccum {
    /// An empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Absorbs one pair.
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.c_xy += dx * (y - self.mean_y);
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
    }

    /// Number of pairs absorbed.
    pub fn count(&self) -> u64 {
        self.n
    }

    /// Sample covariance (unbiased).
    pub fn covariance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.c_xy / (self.n as f64 - 1.0)
    }

    /// Sample correlation coefficient.
    pub fn correlation(&self) -> f64 {
        let denom = sqrt(self.m2_x * self.m2_y);
        if denom == 0.0 {
            return f64::NAN;
        }
        self.c_xy / denom
    }
}

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Supremum distance between the empirical and reference distributions.
    pub statistic: f64,
    /// Asymptotic p-value with the small-sample size correction.
    pub p_value: f64,
    /// Effective sample size entering the correction.
    pub n_effective: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2)`, evaluated through the
/// theta-function dual series for small `t` where the alternating series
/// converges slowly.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if !(t > 0.0) {
        return 1.0;
    }
    if t < 1.18 {
        let w = exp(-core::f64::consts::PI * core::f64::consts::PI / (8.0 * t * t));
        let w2 = w * w;
        let w4 = w2 * w2;
        let w8 = w4 * w4;
        let p = sqrt(2.0 * core::f64::consts::PI) / t * w * (1.0 + w8 * (1.0 + w8 * w8));
        (1.0 - p).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kk = (k * k) as f64;
            let term = sign * exp(-2.0 * kk * t * t);
            sum += term;
            sign = -sign;
            if fabs(term) < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn ks_p_value(d: f64, n_effective: f64) -> f64 {
    let root = sqrt(n_effective);
    kolmogorov_survival(d * (root + 0.12 + 0.11 / root))
}

/// One-sample Kolmogorov-Smirnov test of `sample` against the continuous
/// reference distribution function `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult, Error> {
    if sample.len() < 2 {
        return Err(Error::InvalidParameter {
            what: "ks test needs at least two observations",
        });
    }
    let mut xs: Vec<f64> = sample.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter {
            what: "ks test sample contains NaN",
        });
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN excluded above"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = f - i as f64 / n;
        let hi = (i + 1) as f64 / n - f;
        d = d.max(lo).max(hi);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        n_effective: n,
    })
}

/// Two-sample Kolmogorov-Smirnov test, with effective size
/// `n1 n2 / (n1 + n2)`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KsResult, Error> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter {
            what: "two-sample ks test needs at least two observations per sample",
        });
    }
    if a.iter().chain(b.iter()).any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter {
            what: "ks test sample contains NaN",
        });
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("NaN excluded above"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("NaN excluded above"));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max(fabs(i as f64 / na - j as f64 / nb));
    }
    let n_effective = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_effective),
        n_effective,
    })
}

/// Least-squares line through `(xs, ys)` with the standard error of the
/// fitted slope.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    /// Abscissas the fit was computed from.
    pub xs: Vec<f64>,
    /// Ordinates the fit was computed from.
    pub ys: Vec<f64>,
    /// Fitted slope.
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
    /// Residual-based standard error of the slope.
    pub slope_stderr: f64,
}

/// Ordinary least squares for a line. Requires at least three strictly
/// increasing abscissas so the residual degrees of freedom are positive.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit, Error> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "slope fit needs matching coordinate lengths",
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter {
            what: "slope fit needs at least three points",
        });
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter {
            what: "slope fit abscissas must be strictly increasing",
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut rss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        rss += r * r;
    }
    let slope_stderr = sqrt(rss / (n - 2.0) / sxx);
    Ok(SlopeFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        slope_stderr,
    })
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// Regularized lower incomplete gamma function P(a, x), by power series
/// below `a + 1` and continued fraction above.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if !(a > 0.0) || x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = a * log(x) - x - lgamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..500 {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if fabs(term) < fabs(sum) * 1e-16 {
                break;
            }
        }
        (sum * exp(log_prefactor)).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if fabs(d) < tiny {
                d = tiny;
            }
            c = b + an / c;
            if fabs(c) < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if fabs(del - 1.0) < 1e-15 {
                break;
            }
        }
        (1.0 - exp(log_prefactor) * h).clamp(0.0, 1.0)
    }
}

/// Distribution function of the chi-square law with `k` degrees of freedom.
pub fn chi_square_cdf(x: f64, k: f64) -> f64 {
    gamma_p(0.5 * k, 0.5 * x)
}

fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if fabs(c) < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if fabs(c) < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < 1e-15 {
            break;
        }
    }
    h
}

/// Distribution function of the Beta(a, b) law (regularized incomplete beta
/// function), by the continued fraction with the symmetry switch at
/// `x = (a + 1)/(a + b + 2)`.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    if !(a > 0.0) || !(b > 0.0) || x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let log_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log(1.0 - x);
    let front = exp(log_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        (front * beta_cont_frac(a, b, x) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b).clamp(0.0, 1.0)
    }
}
