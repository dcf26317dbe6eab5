//! Comparison models and evaluation metrics.
//!
//! Four cheap baselines stand against the full hierarchy: a log-log
//! regression on the root's follower count, a time-varying growth-ratio
//! intercept looked up on a one-minute grid, a decaying-rate Poisson fit
//! over five-minute bins, and the constant multiplier 1.4. The fifth
//! comparator — the single-rate Poisson branching model — is the sampler
//! itself run with [`ModelKind::Poisson`]. Point forecasts are scored by
//! absolute percent error; sampler-based fits also report average data
//! log likelihood and the deviance information criterion.

use crate::data::{Dataset, Role};
use crate::error::{Error, Result};
use crate::mcmc::{self, ModelKind, PosteriorSamples, SamplerConfig};
use crate::model::Hyperpriors;
use crate::predict;
use crate::stats;

/// Resolution of the growth-ratio intercept grid.
pub const SZABO_GRID_SECONDS: f64 = 60.0;
/// Bin width of the decaying-rate Poisson fit.
pub const DP_BIN_SECONDS: f64 = 300.0;
/// The naive model's fixed multiplier.
pub const NAIVE_FACTOR: f64 = 1.4;

/// Least-squares fit of log(final size) on log(root followers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerRegression {
    pub beta0: f64,
    pub beta1: f64,
    /// Cascades used (positive final size, at least one root follower).
    pub n_used: usize,
}

/// Fit on the training half. Cascades with no retweets or a followerless
/// root carry no usable point and are dropped.
pub fn fit_follower_regression(ds: &Dataset) -> Result<FollowerRegression> {
    let mut points = Vec::new();
    for i in ds.indices(Role::Training) {
        let g = &ds.cascades[i];
        if g.total_retweets() >= 1 && g.root_followers >= 1 {
            points.push(((g.root_followers as f64).ln(), (g.total_retweets() as f64).ln()));
        }
    }
    if points.len() < 2 {
        return Err(Error::Benchmark(format!(
            "follower regression needs at least 2 usable training cascades, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign(
            "every training root has the same follower count".into(),
        ));
    }
    let beta1 = sxy / sxx;
    Ok(FollowerRegression {
        beta0: mean_y - beta1 * mean_x,
        beta1,
        n_used: points.len(),
    })
}

impl FollowerRegression {
    /// Predicted final size for a root with `followers` followers.
    pub fn predict(&self, followers: u64) -> Result<f64> {
        if followers == 0 {
            return Err(Error::Benchmark(
                "follower regression is undefined for a followerless root".into(),
            ));
        }
        Ok((self.beta0 + self.beta1 * (followers as f64).ln()).exp())
    }
}

/// Time-varying growth-ratio fit: at grid time t, the intercept beta(t) is
/// the mean over training cascades (with at least one retweet by t) of
/// log(final size) - log(size at t); the forecast multiplies the observed
/// count by e^beta. Past the grid every training cascade has finished, so
/// the intercept is zero and the forecast is the observed count itself.
#[derive(Debug, Clone)]
pub struct SzaboFit {
    /// Per training cascade: sorted retweet times and log final size.
    cascades: Vec<(Vec<f64>, f64)>,
    /// Last grid time (seconds), covering the longest training lifetime.
    pub grid_end: f64,
}

/// Fit on the training half; cascades with no retweets carry no growth
/// ratio and are dropped.
pub fn fit_szabo(ds: &Dataset) -> Result<SzaboFit> {
    let mut cascades = Vec::new();
    let mut lifetime_max = 0.0f64;
    for i in ds.indices(Role::Training) {
        let g = &ds.cascades[i];
        if g.total_retweets() == 0 {
            continue;
        }
        let st = g.structure()?;
        let mut times: Vec<f64> = st.order[1..].iter().map(|&v| g.time(v)).collect();
        times.sort_by(f64::total_cmp);
        lifetime_max = lifetime_max.max(*times.last().unwrap());
        cascades.push((times, (g.total_retweets() as f64).ln()));
    }
    if cascades.is_empty() {
        return Err(Error::Benchmark(
            "growth-ratio fit needs at least one training cascade with a retweet".into(),
        ));
    }
    let grid_end = (lifetime_max / SZABO_GRID_SECONDS).ceil().max(1.0) * SZABO_GRID_SECONDS;
    let fit = SzaboFit { cascades, grid_end };
    // every grid point needs at least one cascade with a retweet; counts
    // only grow with t, so the first grid point is the binding one
    if !fit.cascades.iter().any(|(times, _)| times[0] <= SZABO_GRID_SECONDS) {
        return Err(Error::Benchmark(format!(
            "no training cascade has a retweet within the first {SZABO_GRID_SECONDS} seconds; \
             the intercept is undefined at the first grid point"
        )));
    }
    Ok(fit)
}

impl SzaboFit {
    /// Intercept at the grid point nearest to `t` (zero past the grid).
    pub fn beta_at(&self, t: f64) -> f64 {
        let snapped = (t / SZABO_GRID_SECONDS).round().max(1.0) * SZABO_GRID_SECONDS;
        if snapped > self.grid_end {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for (times, ln_total) in &self.cascades {
            let m = times.partition_point(|&s| s <= snapped);
            if m >= 1 {
                sum += ln_total - (m as f64).ln();
                n += 1;
            }
        }
        debug_assert!(n > 0, "unreachable: checked at fit time");
        sum / n as f64
    }

    /// Forecast the final size from `m_obs` retweets observed by time `t`.
    pub fn predict(&self, m_obs: u64, t: f64) -> f64 {
        m_obs as f64 * self.beta_at(t).exp()
    }
}

/// Decaying-rate Poisson fit: bin-k counts are modeled as
/// Poisson(lambda * delta^k) over five-minute bins k = 0, 1, ….
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicPoissonFit {
    pub lambda: f64,
    pub delta: f64,
    /// Set when the decay is unidentified (all counts in a single bin) or
    /// the likelihood is maximized at the edge of (0, 1); `delta` is then
    /// clamped near the boundary and forecasts are unreliable.
    pub boundary: bool,
    /// Index of the last non-empty bin.
    pub last_bin: u64,
}

/// Sum of delta^k for k = 0..=last, stable at delta near one. Bin indices
/// of heavy-tailed cascades overflow everything integral, so exponents go
/// through `powf`.
fn geom_sum(delta: f64, last: u64) -> f64 {
    if (1.0 - delta).abs() < 1e-9 {
        return last as f64 + 1.0;
    }
    (1.0 - delta.powf(last as f64 + 1.0)) / (1.0 - delta)
}

/// Sum of k * delta^k for k = 0..=last.
fn geom_weighted_sum(delta: f64, last: u64) -> f64 {
    let k = last as f64;
    if (1.0 - delta).abs() < 1e-9 {
        return k * (k + 1.0) / 2.0;
    }
    let d = 1.0 - delta;
    delta * (1.0 - (k + 1.0) * delta.powf(k) + k * delta.powf(k + 1.0)) / (d * d)
}

/// Mean bin index of the model's count mass at decay `delta`; strictly
/// increasing in delta, which makes the likelihood equation solvable by
/// bisection.
fn model_mean_bin(delta: f64, last: u64) -> f64 {
    geom_weighted_sum(delta, last) / geom_sum(delta, last)
}

/// Maximum-likelihood fit from per-bin counts (`counts[k]` is the number
/// of retweets in bin k; trailing zero bins are ignored). The profile
/// likelihood in delta is unimodal; its stationarity condition equates the
/// model's mean bin index with the data's, solved here by bisection.
pub fn fit_dynamic_poisson_counts(counts: &[u64]) -> Result<DynamicPoissonFit> {
    let last_bin = counts
        .iter()
        .rposition(|&c| c > 0)
        .ok_or_else(|| Error::Benchmark("no retweets to fit a decaying rate to".into()))?
        as u64;
    let n: u64 = counts.iter().sum();
    let s: f64 = counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum();
    fit_dynamic_poisson_stats(n, s, last_bin)
}

/// The fit needs only the total count, the count-weighted bin-index sum,
/// and the last occupied bin — never the bins themselves, which protects
/// against cascades whose lifetime spans astronomically many bins.
fn fit_dynamic_poisson_stats(n: u64, s: f64, last_bin: u64) -> Result<DynamicPoissonFit> {
    let target = s / n as f64;

    const EDGE: f64 = 1e-9;
    let (delta, boundary) = if target <= model_mean_bin(EDGE, last_bin) {
        (EDGE, true)
    } else if target >= model_mean_bin(1.0 - EDGE, last_bin) {
        (1.0 - EDGE, true)
    } else {
        let (mut lo, mut hi) = (EDGE, 1.0 - EDGE);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if model_mean_bin(mid, last_bin) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), false)
    };
    Ok(DynamicPoissonFit {
        lambda: n as f64 / geom_sum(delta, last_bin),
        delta,
        boundary,
        last_bin,
    })
}

/// Bin index of an event time (seconds since the root post).
pub fn dp_bin(t: f64) -> u64 {
    (t / DP_BIN_SECONDS).floor().max(0.0) as u64
}

/// Pool every training cascade's retweet times (each clock starting at its
/// own root post) and fit the decay on the summed histogram.
pub fn fit_dynamic_poisson(ds: &Dataset) -> Result<DynamicPoissonFit> {
    let (mut n, mut s, mut last_bin) = (0u64, 0.0f64, 0u64);
    for i in ds.indices(Role::Training) {
        let g = &ds.cascades[i];
        let st = g.structure()?;
        for &v in &st.order[1..] {
            let k = dp_bin(g.time(v));
            n += 1;
            s += k as f64;
            last_bin = last_bin.max(k);
        }
    }
    if n == 0 {
        return Err(Error::Benchmark("no retweets to fit a decaying rate to".into()));
    }
    fit_dynamic_poisson_stats(n, s, last_bin)
}

impl DynamicPoissonFit {
    /// Retweets still to come after bin `k_last` (the geometric tail
    /// lambda * delta^(k+1) / (1 - delta)).
    pub fn remaining_after(&self, k_last: u64) -> f64 {
        self.lambda * self.delta.powf(k_last as f64 + 1.0) / (1.0 - self.delta)
    }

    /// Expected eventual total, lambda / (1 - delta).
    pub fn expected_total(&self) -> f64 {
        self.lambda / (1.0 - self.delta)
    }

    /// Forecast a cascade's final size from `m_obs` retweets observed over
    /// `elapsed` seconds, reusing this fit's decay but rescaling the rate
    /// so the observed window's expected count matches m_obs exactly:
    /// final = m_obs + m_obs * delta^(K+1) / (1 - delta^(K+1)) with K the
    /// bin containing the horizon.
    pub fn predict_final_from_prefix(&self, m_obs: u64, elapsed: f64) -> f64 {
        let tail_mass = self.delta.powf(dp_bin(elapsed) as f64 + 1.0);
        let observed_mass = 1.0 - tail_mass;
        if observed_mass <= 0.0 {
            return m_obs as f64;
        }
        m_obs as f64 * (1.0 + tail_mass / observed_mass)
    }
}

/// Fit the single-rate Poisson branching comparison model: the full
/// sampler with the binomial/link block replaced by one shared rate.
pub fn fit_poisson_baseline(
    ds: &Dataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
) -> Result<PosteriorSamples> {
    let config = SamplerConfig { model: ModelKind::Poisson, ..*config };
    mcmc::run_chains(ds, &config, hp)
}

/// The constant-multiplier forecast.
pub fn naive_predict(m_obs: u64) -> f64 {
    NAIVE_FACTOR * m_obs as f64
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Absolute percent error, 100 |prediction - truth| / truth.
pub fn ape(prediction: f64, true_total: u64) -> Result<f64> {
    if true_total == 0 {
        return Err(Error::Benchmark(
            "absolute percent error is undefined for a true total of zero".into(),
        ));
    }
    Ok(100.0 * (prediction - true_total as f64).abs() / true_total as f64)
}

/// Median absolute percent error.
pub fn mape(apes: &[f64]) -> Result<f64> {
    if apes.is_empty() {
        return Err(Error::Benchmark("no errors to take the median of".into()));
    }
    Ok(stats::median(apes))
}

/// Percent error against the retweets still to come, |prediction - truth|
/// / (truth - observed); `None` when nothing was left to predict.
pub fn remaining_ape(prediction: f64, true_total: u64, m_obs: u64) -> Option<f64> {
    if true_total <= m_obs {
        return None;
    }
    Some(100.0 * (prediction - true_total as f64).abs() / (true_total - m_obs) as f64)
}

/// Average data log likelihood over kept draws of a sampler fit.
pub fn avg_loglik(samples: &PosteriorSamples) -> f64 {
    samples.fit.avg_loglik()
}

/// Deviance information criterion of a sampler fit (lower fits better).
pub fn dic(samples: &PosteriorSamples) -> f64 {
    samples.fit.dic()
}

// ---------------------------------------------------------------------------
// the per-cascade scoring harness
// ---------------------------------------------------------------------------

/// One scored forecast.
#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub model: &'static str,
    pub tweet_id: String,
    pub fraction: f64,
    /// Retweets observed by the horizon.
    pub m_obs: u64,
    pub prediction: f64,
    pub true_m: u64,
    pub ape: f64,
}

impl BenchmarkRow {
    /// Percent error against the retweets that were still to come; `None`
    /// when the cascade was already complete at the horizon.
    pub fn remaining_ape(&self) -> Option<f64> {
        remaining_ape(self.prediction, self.true_m, self.m_obs)
    }
}

/// Score the four cheap baselines on every prediction cascade of a dataset
/// whose observation windows are attached. Roots with no followers are
/// scored at the follower regression's f = 1 boundary (the covariate's
/// smallest defined value). A fully observed cascade has finished growing,
/// so its growth-ratio lookup uses a horizon past the grid, which yields
/// the identity forecast.
pub fn baseline_rows(ds: &Dataset) -> Result<Vec<BenchmarkRow>> {
    let follower = fit_follower_regression(ds)?;
    let szabo = fit_szabo(ds)?;
    let dp = fit_dynamic_poisson(ds)?;

    let mut rows = Vec::new();
    for i in ds.indices(Role::Prediction) {
        let g = &ds.cascades[i];
        let obs = ds.observations[i].as_ref().ok_or_else(|| {
            Error::Dataset(format!("prediction cascade {} has no observation window", g.tweet_id))
        })?;
        let true_m = g.total_retweets();
        let m_obs = obs.observed_retweets();
        let horizon = if obs.fraction >= 1.0 { f64::INFINITY } else { obs.observation_time };

        let mut push = |model: &'static str, prediction: f64| -> Result<()> {
            rows.push(BenchmarkRow {
                model,
                tweet_id: g.tweet_id.clone(),
                fraction: obs.fraction,
                m_obs,
                prediction,
                true_m,
                ape: ape(prediction, true_m)?,
            });
            Ok(())
        };
        push("follower_regression", follower.predict(g.root_followers.max(1))?)?;
        push("szabo", szabo.predict(m_obs, horizon))?;
        push("dynamic_poisson", dp.predict_final_from_prefix(m_obs, obs.observation_time))?;
        push("naive", naive_predict(m_obs))?;
    }
    Ok(rows)
}

/// Score a sampler fit (full model or Poisson baseline) on every
/// prediction cascade, using the posterior median as the point forecast.
pub fn sampler_rows(samples: &PosteriorSamples, ds: &Dataset) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::new();
    for i in ds.indices(Role::Prediction) {
        let g = &ds.cascades[i];
        let obs = ds.observations[i].as_ref().ok_or_else(|| {
            Error::Dataset(format!("prediction cascade {} has no observation window", g.tweet_id))
        })?;
        let summary = predict::predictive_total(samples, obs, 0.90)?;
        let true_m = g.total_retweets();
        rows.push(BenchmarkRow {
            model: samples.model.name(),
            tweet_id: g.tweet_id.clone(),
            fraction: obs.fraction,
            m_obs: obs.observed_retweets(),
            prediction: summary.median,
            true_m,
            ape: ape(summary.median, true_m)?,
        });
    }
    Ok(rows)
}

/// Median APE per model over a set of rows, sorted by model name.
pub fn mape_by_model(rows: &[BenchmarkRow]) -> Vec<(String, f64)> {
    let mut by_model: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for r in rows {
        by_model.entry(r.model).or_default().push(r.ape);
    }
    by_model
        .into_iter()
        .map(|(model, apes)| (model.to_string(), stats::median(&apes)))
        .collect()
}

/// Per-cell accumulator for [`mape_table`]: total and remaining APEs keyed
/// by (model, fraction bits).
type MapeCells<'a> = std::collections::BTreeMap<(&'a str, u64), (Vec<f64>, Vec<f64>)>;

/// Median total and remaining percent errors per (model, fraction) cell,
/// sorted by model then fraction. The remaining-count median is `None`
/// when every scored cascade in the cell was already complete.
pub fn mape_table(rows: &[BenchmarkRow]) -> Vec<(String, f64, f64, Option<f64>)> {
    let mut cells: MapeCells = Default::default();
    for r in rows {
        let cell = cells.entry((r.model, r.fraction.to_bits())).or_default();
        cell.0.push(r.ape);
        if let Some(ra) = r.remaining_ape() {
            cell.1.push(ra);
        }
    }
    cells
        .into_iter()
        .map(|((model, fraction), (total, remaining))| {
            (
                model.to_string(),
                f64::from_bits(fraction),
                stats::median(&total),
                (!remaining.is_empty()).then(|| stats::median(&remaining)),
            )
        })
        .collect()
}
