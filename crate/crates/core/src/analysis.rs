//! Descriptive corpus statistics: maximum-likelihood log-normal fits of
//! reaction times, CCDF comparisons, retweet depth counts, rank/linear
//! correlation tests, and a pooled logistic-scale regression of observed
//! branching fractions on the link covariates. These are the exploratory
//! counterparts of the generative model — cheap to compute, useful for
//! checking a corpus before committing to a long sampler run.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{Dataset, Role};
use crate::error::{Error, Result};
use crate::stats;

/// Maximum-likelihood log-normal fit of a set of reaction times: the mean
/// and the biased (1/n) standard deviation of the logs.
pub fn ml_lognormal(reactions: &[f64]) -> Result<(f64, f64)> {
    if reactions.is_empty() {
        return Err(Error::InvalidArgument(
            "log-normal fit needs at least one reaction time".into(),
        ));
    }
    if reactions.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::InvalidArgument(
            "log-normal fit needs strictly positive reaction times".into(),
        ));
    }
    let n = reactions.len() as f64;
    let alpha = reactions.iter().map(|s| s.ln()).sum::<f64>() / n;
    let var = reactions.iter().map(|s| (s.ln() - alpha).powi(2)).sum::<f64>() / n;
    Ok((alpha, var.sqrt()))
}

/// Skew diagnostic of the log reaction times: (mean − median) / median of
/// the logs. Zero for symmetric logs; grows with right skew. Undefined
/// (and an error) when the median log is exactly zero.
pub fn delta_x(reactions: &[f64]) -> Result<f64> {
    if reactions.is_empty() {
        return Err(Error::InvalidArgument(
            "skew diagnostic needs at least one reaction time".into(),
        ));
    }
    if reactions.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::InvalidArgument(
            "skew diagnostic needs strictly positive reaction times".into(),
        ));
    }
    let logs: Vec<f64> = reactions.iter().map(|s| s.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let med = stats::median(&logs);
    if med == 0.0 {
        return Err(Error::InvalidArgument(
            "skew diagnostic is undefined when the median log reaction time is zero".into(),
        ));
    }
    Ok((mean - med) / med)
}

/// Empirical complementary CDF as plot-ready pairs: at each sorted value
/// s_(i) the survival probability (n − i)/n, stepping from 1 − 1/n down
/// to 0.
pub fn empirical_ccdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, (n - (i + 1) as f64) / n))
        .collect()
}

/// Log-normal model CCDF: P(S > s) = 1 − Φ((ln s − alpha)/tau). Equals
/// one half at s = e^alpha.
pub fn lognormal_ccdf(s: f64, alpha: f64, tau: f64) -> f64 {
    debug_assert!(s > 0.0 && tau > 0.0);
    1.0 - stats::std_normal_cdf((s.ln() - alpha) / tau)
}

/// Corpus-level retweeter depth counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthStats {
    /// `histogram[d - 1]` = number of retweeters at hop distance d.
    pub histogram: Vec<u64>,
    /// Retweeters one hop from the root.
    pub depth_one: u64,
    /// Retweeters more than one hop from the root.
    pub deeper: u64,
}

/// Count retweeter depths over every cascade in the corpus.
pub fn depth_stats(ds: &Dataset) -> Result<DepthStats> {
    let mut histogram: Vec<u64> = Vec::new();
    for g in &ds.cascades {
        let st = g.structure()?;
        for &d in &st.depths[1..] {
            let idx = d as usize - 1;
            if idx >= histogram.len() {
                histogram.resize(idx + 1, 0);
            }
            histogram[idx] += 1;
        }
    }
    let depth_one = histogram.first().copied().unwrap_or(0);
    let deeper = histogram.iter().skip(1).sum();
    Ok(DepthStats { histogram, depth_one, deeper })
}

/// Linear and rank correlation of paired observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlations {
    pub n: usize,
    pub pearson_r: f64,
    /// Two-sided p-value from the t distribution with n − 2 degrees of
    /// freedom.
    pub pearson_p: f64,
    /// Kendall's tau-b (tie-adjusted denominator).
    pub kendall_tau: f64,
    /// Two-sided p-value from the normal approximation with tie-corrected
    /// variance.
    pub kendall_p: f64,
}

/// Tie-group sums over a column: (Σ t(t−1), Σ t(t−1)(t−2), Σ t(t−1)(2t+5))
/// across groups of t equal values.
fn tie_sums(column: &[f64]) -> (f64, f64, f64) {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        s1 += t * (t - 1.0);
        s2 += t * (t - 1.0) * (t - 2.0);
        s3 += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j;
    }
    (s1, s2, s3)
}

/// Pearson and Kendall correlation with two-sided p-values.
pub fn correlations(pairs: &[(f64, f64)]) -> Result<Correlations> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation tests need at least 3 pairs, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateDesign(
            "correlation is undefined for a constant column".into(),
        ));
    }
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let pearson_r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let pearson_p = if pearson_r.abs() >= 1.0 {
        0.0
    } else {
        let t = pearson_r * (df / (1.0 - pearson_r * pearson_r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        2.0 * dist.sf(t.abs())
    };

    // Kendall: classify every pair as concordant, discordant, or tied.
    let (mut conc, mut disc) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pairs[i].0 - pairs[j].0;
            let dy = pairs[i].1 - pairs[j].1;
            if dx == 0.0 {
                tied_x += 1;
                if dy == 0.0 {
                    tied_y += 1;
                }
            } else if dy == 0.0 {
                tied_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = (n0 - tied_x as f64) * (n0 - tied_y as f64);
    debug_assert!(denom > 0.0, "constant column was rejected above");
    let s_stat = (conc - disc) as f64;
    let kendall_tau = (s_stat / denom.sqrt()).clamp(-1.0, 1.0);

    // tie-corrected null variance of the concordant-minus-discordant count
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (x1, x2, x3) = tie_sums(&xs);
    let (y1, y2, y3) = tie_sums(&ys);
    let var_s = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - x3 - y3) / 18.0
        + x2 * y2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
        + x1 * y1 / (2.0 * nf * (nf - 1.0));
    let z = s_stat / var_s.sqrt();
    let kendall_p = 2.0 * (1.0 - stats::std_normal_cdf(z.abs()));

    Ok(Correlations { n, pearson_r, pearson_p, kendall_tau, kendall_p })
}

/// Pooled ordinary-least-squares fit of observed logit branching fractions
/// on the link covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploratoryRegression {
    /// Intercept, log-follower slope, log-depth slope.
    pub beta: [f64; 3],
    pub std_err: [f64; 3],
    /// Two-sided t-test p-values (n − 3 degrees of freedom).
    pub p_values: [f64; 3],
    /// Regression rows after filtering.
    pub n_used: usize,
    /// Vertices dropped because every follower retweeted (infinite logit).
    pub n_saturated: usize,
}

/// OLS core over rows of (logit branching fraction, log(f + 1),
/// log(d + 1)).
pub fn logit_regression_rows(rows: &[(f64, f64, f64)]) -> Result<ExploratoryRegression> {
    let n = rows.len();
    if n < 4 {
        return Err(Error::DegenerateDesign(format!(
            "logit regression needs at least 4 rows for an error estimate, got {n}"
        )));
    }
    let mut xtx = nalgebra::Matrix3::<f64>::zeros();
    let mut xty = nalgebra::Vector3::<f64>::zeros();
    for &(y, lf, ld) in rows {
        let x = nalgebra::Vector3::new(1.0, lf, ld);
        xtx += x * x.transpose();
        xty += x * y;
    }
    let chol = nalgebra::Cholesky::new(xtx).ok_or_else(|| {
        Error::DegenerateDesign("logit regression design matrix is singular".into())
    })?;
    let beta = chol.solve(&xty);
    let rss: f64 = rows
        .iter()
        .map(|&(y, lf, ld)| (y - beta[0] - beta[1] * lf - beta[2] * ld).powi(2))
        .sum::<f64>()
        .max(0.0);
    let df = (n - 3) as f64;
    let s2 = rss / df;
    let cov = chol.inverse() * s2;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let mut std_err = [0.0; 3];
    let mut p_values = [0.0; 3];
    for i in 0..3 {
        std_err[i] = cov[(i, i)].max(0.0).sqrt();
        p_values[i] = if std_err[i] == 0.0 {
            // exact fit: a zero coefficient carries no evidence either way
            if beta[i] == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            2.0 * dist.sf((beta[i] / std_err[i]).abs())
        };
    }
    Ok(ExploratoryRegression {
        beta: [beta[0], beta[1], beta[2]],
        std_err,
        p_values,
        n_used: n,
        n_saturated: 0,
    })
}

/// Regress logit(M_j / f_j) on (1, log(f_j + 1), log(d_j + 1)) over every
/// vertex of the corpus (roots included) with at least one retweet child.
/// Vertices where every follower retweeted have an infinite logit and are
/// excluded; the count of such exclusions is reported.
pub fn exploratory_logit_regression(ds: &Dataset) -> Result<ExploratoryRegression> {
    let mut rows = Vec::new();
    let mut n_saturated = 0usize;
    for g in &ds.cascades {
        let st = g.structure()?;
        for v in 0..g.n_vertices() {
            let m = st.out_degrees[v];
            if m == 0 {
                continue;
            }
            let f = g.followers(v);
            if m >= f {
                n_saturated += 1;
                continue;
            }
            rows.push((
                stats::logit(m as f64 / f as f64),
                (f as f64 + 1.0).ln(),
                (st.depths[v] as f64 + 1.0).ln(),
            ));
        }
    }
    let mut fit = logit_regression_rows(&rows)?;
    fit.n_saturated = n_saturated;
    Ok(fit)
}

/// Per-cascade descriptive statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetEda {
    pub tweet_id: String,
    pub role: Role,
    /// Final retweet count M^x.
    pub m_total: u64,
    /// Log-normal ML location of the reaction times.
    pub alpha_ml: f64,
    /// Log-normal ML scale (biased form).
    pub tau_ml: f64,
    /// Median absolute retweet time in seconds.
    pub median_retweet_time: f64,
    /// Skew diagnostic of the log reaction times; `None` when its median
    /// log is exactly zero.
    pub delta: Option<f64>,
    pub depth_one: u64,
    pub deeper: u64,
}

impl TweetEda {
    /// Fraction of retweeters more than one hop from the root.
    pub fn frac_deep(&self) -> f64 {
        self.deeper as f64 / (self.depth_one + self.deeper) as f64
    }
}

/// The full descriptive report over a corpus.
#[derive(Debug, Clone)]
pub struct EdaReport {
    /// One row per cascade with at least one retweet.
    pub tweets: Vec<TweetEda>,
    pub depth: DepthStats,
    /// Corpus mean of the per-tweet ML locations.
    pub mean_alpha_ml: f64,
    /// Corpus standard deviation (n − 1 form) of the per-tweet ML
    /// locations.
    pub sd_alpha_ml: f64,
    pub mean_tau_ml: f64,
    /// Median retweet time vs final size; `None` for corpora too small or
    /// too degenerate to test.
    pub correlations: Option<Correlations>,
    /// `None` when the pooled design is too small or singular.
    pub regression: Option<ExploratoryRegression>,
}

/// Build the descriptive report. Cascades without retweets carry no
/// reaction times and are skipped in the per-tweet table.
pub fn eda_report(ds: &Dataset) -> Result<EdaReport> {
    let tweets: Vec<TweetEda> = (0..ds.len())
        .into_par_iter()
        .map(|i| -> Result<Option<TweetEda>> {
            let g = &ds.cascades[i];
            if g.total_retweets() == 0 {
                return Ok(None);
            }
            let st = g.structure()?;
            let reactions = &st.reaction_times[1..];
            let (alpha_ml, tau_ml) = ml_lognormal(reactions)?;
            let times: Vec<f64> = (1..g.n_vertices()).map(|v| g.time(v)).collect();
            let depth_one = st.depths[1..].iter().filter(|&&d| d == 1).count() as u64;
            Ok(Some(TweetEda {
                tweet_id: g.tweet_id.clone(),
                role: ds.roles[i],
                m_total: g.total_retweets(),
                alpha_ml,
                tau_ml,
                median_retweet_time: stats::median(&times),
                delta: delta_x(reactions).ok(),
                depth_one,
                deeper: g.total_retweets() - depth_one,
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if tweets.is_empty() {
        return Err(Error::Dataset(
            "descriptive report needs at least one cascade with a retweet".into(),
        ));
    }

    let n = tweets.len() as f64;
    let mean_alpha_ml = tweets.iter().map(|t| t.alpha_ml).sum::<f64>() / n;
    let sd_alpha_ml = if tweets.len() > 1 {
        (tweets.iter().map(|t| (t.alpha_ml - mean_alpha_ml).powi(2)).sum::<f64>() / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let mean_tau_ml = tweets.iter().map(|t| t.tau_ml).sum::<f64>() / n;

    let pairs: Vec<(f64, f64)> =
        tweets.iter().map(|t| (t.median_retweet_time, t.m_total as f64)).collect();
    let correlations = match correlations(&pairs) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("skipping correlation tests: {e}");
            None
        }
    };
    let regression = match exploratory_logit_regression(ds) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("skipping logit regression: {e}");
            None
        }
    };

    Ok(EdaReport {
        tweets,
        depth: depth_stats(ds)?,
        mean_alpha_ml,
        sd_alpha_ml,
        mean_tau_ml,
        correlations,
        regression,
    })
}
