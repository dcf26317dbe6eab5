//! Scalar densities, special-function wrappers and small numeric utilities
//! shared by the model, the sampler and the benchmark estimators.
//!
//! Everything here is a total function: out-of-support arguments yield
//! `f64::NEG_INFINITY` (for log densities) or `NaN` rather than errors, so the
//! hot sampling loops stay branch-light. Input validation with useful error
//! messages lives in the higher-level modules.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// log(p / (1 - p)). Infinite at the endpoints.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse logit, stable in both tails.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow for large |x|.
pub fn softplus(x: f64) -> f64 {
    if x > 33.0 {
        // e^-x below f64 noise floor of x itself
        x
    } else if x < -33.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Density of N(mean, sd^2) in log space.
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

/// Standard normal CDF via the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_cdf((x - mean) / sd)
}

/// log(1 - Phi(z)), accurate over the whole real line.
///
/// Three regimes: for z below -1 the survival is near one and `ln_1p` of the
/// (tiny, directly computed) lower tail keeps full precision; in the central
/// range erfc itself is a direct tail computation with no cancellation; past
/// z = 30 erfc heads toward the subnormal range, so we switch to the
/// asymptotic expansion
///   1 - Phi(z) = phi(z)/z * (1 - z^-2 + 3 z^-4 - 15 z^-6 + 105 z^-8 - ...)
/// whose truncation error at the switch point is below 1e-12 relative.
pub fn std_normal_log_sf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < -1.0 {
        (-0.5 * erfc(-z / SQRT_2)).ln_1p()
    } else if z < 30.0 {
        (0.5 * erfc(z / SQRT_2)).ln()
    } else {
        let zi = 1.0 / (z * z);
        let series = 1.0 + zi * (-1.0 + zi * (3.0 + zi * (-15.0 + zi * (105.0 - zi * 945.0))));
        -0.5 * z * z - z.ln() - 0.5 * LN_2PI + series.ln()
    }
}

pub fn normal_log_sf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_log_sf((x - mean) / sd)
}

/// log of the binomial coefficient C(n, k); -inf when k > n.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log P(m | n, p) for Binomial(n, p), with the success probability given on
/// the logit scale. The softplus forms stay finite for any finite `y`, which
/// matters during early sampler iterations when logit(b) can be far out in a
/// tail.
pub fn binomial_logpmf_logit(m: u64, n: u64, y: f64) -> f64 {
    if m > n {
        return f64::NEG_INFINITY;
    }
    ln_choose(n, m) - (m as f64) * softplus(-y) - ((n - m) as f64) * softplus(y)
}

/// log P(m | n, p) for Binomial(n, p) with p in [0, 1].
pub fn binomial_logpmf(m: u64, n: u64, p: f64) -> f64 {
    if m > n || !(0.0..=1.0).contains(&p) {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if m == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if m == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, m) + (m as f64) * p.ln() + ((n - m) as f64) * (-p).ln_1p()
}

/// log P(m | lambda) for Poisson(lambda).
pub fn poisson_logpmf(m: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return if m == 0 && lambda == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    (m as f64) * lambda.ln() - lambda - ln_gamma(m as f64 + 1.0)
}

/// Inverse-gamma log density with shape `a` and scale `b`:
/// `a ln b - ln G(a) - (a+1) ln v - b/v`.
pub fn inv_gamma_logpdf(v: f64, a: f64, b: f64) -> f64 {
    if v <= 0.0 || a <= 0.0 || b <= 0.0 {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) - (a + 1.0) * v.ln() - b / v
}

/// Gamma log density with shape `k` and **scale** `theta`.
pub fn gamma_logpdf(x: f64, k: f64, theta: f64) -> f64 {
    if x <= 0.0 || k <= 0.0 || theta <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -k * theta.ln() - ln_gamma(k) + (k - 1.0) * x.ln() - x / theta
}

/// Density of `x` when log(x) ~ N(mu, sigma^2), i.e. the log-normal pdf
/// including the 1/x change-of-variables factor.
pub fn lognormal_variable_logpdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    normal_logpdf(x.ln(), mu, sigma) - x.ln()
}

/// CDF of Gamma(shape k, scale theta) via the regularized lower incomplete
/// gamma function.
pub fn gamma_cdf(x: f64, k: f64, theta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(k, x / theta)
}

/// CDF of InverseGamma(shape a, scale b): P(V <= v) = Q(a, b/v).
pub fn inv_gamma_cdf(v: f64, a: f64, b: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_ur(a, b / v)
}

/// Draw from InverseGamma(shape a, scale b) as the reciprocal of a
/// Gamma(shape a, rate b) draw.
pub fn sample_inv_gamma<R: rand::Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    use rand_distr::Distribution;
    let g = rand_distr::Gamma::new(a, 1.0 / b).expect("inverse-gamma shape/scale must be positive");
    1.0 / g.sample(rng)
}

/// Type-7 (linear interpolation) quantile of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level must lie in [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Median with the even-count convention: mean of the two central order
/// statistics (the type-7 0.5 quantile).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    quantile_sorted(&v, 0.5)
}
