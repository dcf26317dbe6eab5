//! Posterior-predictive forecasts of final cascade size.
//!
//! Each kept draw carries every observed vertex's final child count; their
//! sum is that draw's forecast of the cascade's eventual retweet total.
//! Pooling the sums across chains gives the predictive distribution that
//! the point forecast (median) and equal-tailed credible interval
//! summarize.

use crate::data::{ObservedCascade, Role};
use crate::error::{Error, Result};
use crate::mcmc::PosteriorSamples;
use crate::stats;

/// Point forecast and equal-tailed credible interval of one cascade's
/// final retweet count.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSummary {
    pub tweet_id: String,
    /// Observation horizon t^x the forecast conditions on (seconds).
    pub observation_time: f64,
    /// Fraction of the final size that was observed.
    pub fraction: f64,
    /// Interval mass, e.g. 0.90.
    pub level: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_draws: usize,
}

impl PredictiveSummary {
    pub fn contains(&self, value: u64) -> bool {
        self.lo <= value as f64 && value as f64 <= self.hi
    }
}

/// Equal-tailed interval of mass `level` from unsorted draws, using
/// linear-interpolation quantiles.
pub fn credible_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no draws to summarize".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "interval mass must lie in (0, 1), got {level}"
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        stats::quantile_sorted(&sorted, tail),
        stats::quantile_sorted(&sorted, 1.0 - tail),
    ))
}

/// Pooled final-size draws (sums of final child counts over the observed
/// vertices) for one partially observed tweet, across all chains.
pub fn pooled_size_draws(samples: &PosteriorSamples, tweet_id: &str) -> Result<Vec<f64>> {
    let idx = samples
        .tweet_ids
        .iter()
        .position(|id| id == tweet_id)
        .ok_or_else(|| Error::InvalidArgument(format!("tweet {tweet_id} was not fitted")))?;
    if samples.tweet_roles[idx] != Role::Prediction {
        return Err(Error::InvalidArgument(format!(
            "tweet {tweet_id} was fitted as fully observed; it has no forecast"
        )));
    }
    Ok(samples
        .chains
        .iter()
        .flat_map(|c| c.records.iter().map(|r| r.m_totals[idx] as f64))
        .collect())
}

/// Forecast one cascade's final retweet count from its fitted samples.
pub fn predictive_total(
    samples: &PosteriorSamples,
    obs: &ObservedCascade,
    level: f64,
) -> Result<PredictiveSummary> {
    let draws = pooled_size_draws(samples, &obs.tweet_id)?;
    let (lo, hi) = credible_interval(&draws, level)?;
    let mut sorted = draws;
    sorted.sort_by(f64::total_cmp);
    Ok(PredictiveSummary {
        tweet_id: obs.tweet_id.clone(),
        observation_time: obs.observation_time,
        fraction: obs.fraction,
        level,
        median: stats::median(&sorted),
        lo,
        hi,
        n_draws: sorted.len(),
    })
}

/// Earliest horizon at which the forecast interval captures the true final
/// count: scans the summaries in horizon order and returns the first
/// `observation_time` whose interval contains `true_m`, or infinity if
/// none does.
pub fn time_to_capture(summaries: &[PredictiveSummary], true_m: u64) -> f64 {
    let mut ordered: Vec<&PredictiveSummary> = summaries.iter().collect();
    ordered.sort_by(|a, b| a.observation_time.total_cmp(&b.observation_time));
    ordered
        .iter()
        .find(|s| s.contains(true_m))
        .map(|s| s.observation_time)
        .unwrap_or(f64::INFINITY)
}
