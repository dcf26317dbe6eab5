//! Metropolis-within-Gibbs sampler over the full hierarchy.
//!
//! One sweep has three phases. Phase 1 updates the corpus-level block
//! serially: the link coefficients and their noise variance (conjugate
//! regression), the reaction-mean pair (alpha, sigma_delta^2), the
//! reaction-variance pair (a_tau by random walk, b_tau by gamma
//! conjugacy) — or, under the homogeneous-Poisson baseline, the single
//! branching rate instead of the regression block. Phase 2 updates every
//! tweet's (alpha_x, tau_x): exact conjugate draws for fully observed
//! tweets, Metropolis steps absorbing the right-censoring terms for
//! partially observed ones. Phase 3 updates every vertex: its logit
//! retweet probability, then (for partially observed tweets) its final
//! child count, constrained to [observed count, follower count].
//!
//! Phases 2 and 3 run in parallel across tweets, but every update unit
//! owns a counter-keyed random stream ([`rng::stream_rng`]), so the draws
//! — and therefore every artifact — are identical no matter how many
//! worker threads execute them.

pub mod diagnostics;
pub mod rng;
pub mod steps;

use rayon::prelude::*;

use crate::data::{Dataset, Role};
use crate::error::{Error, Result};
use crate::model::{GlobalParams, Hyperpriors, TweetParams, UserParams};
use crate::stats;
use rng::{stream_rng, Phase, StreamKey};

/// Which branching model the sampler fits. Both share the reaction-time
/// hierarchy; they differ in what explains the child counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Per-vertex binomial branching with the covariate link on logit(b_j).
    Full,
    /// A single Poisson branching rate shared by every vertex.
    Poisson,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Poisson => "poisson",
        }
    }
}

/// Sampler run settings. `n_iterations` counts all sweeps including
/// burn-in; kept draws are the post-burn-in sweeps at the thinning cadence.
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub n_iterations: u64,
    pub burn_in: u64,
    pub n_chains: u64,
    pub thinning: u64,
    pub seed: u64,
    pub model: ModelKind,
    /// Random-walk sd of the a_tau step.
    pub rw_step_a_tau: f64,
    /// Random-walk sd of the alpha_x step for partially observed tweets.
    pub rw_step_alpha_x: f64,
    /// Verify the per-vertex count constraints after every sweep.
    pub check_constraints: bool,
    /// Retain per-vertex final-count draws in the kept records (the
    /// per-tweet totals are always retained). Forecasting only needs the
    /// totals; dumps of the full latent state can be switched off to keep
    /// long runs on large corpora in memory.
    pub keep_latent_m: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iterations: 3000,
            burn_in: 1000,
            n_chains: 3,
            thinning: 1,
            seed: 0,
            model: ModelKind::Full,
            rw_step_a_tau: 0.2,
            rw_step_alpha_x: 0.2,
            check_constraints: true,
            keep_latent_m: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidArgument("n_iterations must be positive".into()));
        }
        if self.burn_in >= self.n_iterations {
            return Err(Error::InvalidArgument(format!(
                "burn_in ({}) must be below n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidArgument("n_chains must be at least 1".into()));
        }
        for (name, v) in [
            ("rw_step_a_tau", self.rw_step_a_tau),
            ("rw_step_alpha_x", self.rw_step_alpha_x),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn keeps(&self, iteration: u64) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in - 1) % self.thinning == 0
    }

    fn n_kept(&self) -> u64 {
        (self.n_iterations - self.burn_in).div_ceil(self.thinning)
    }
}

/// Per-vertex constants the sweep needs, precomputed once.
#[derive(Debug, Clone)]
pub struct PreparedVertex {
    pub followers: u64,
    /// log(followers + 1), the link covariate.
    pub ln_f1: f64,
    /// log(depth + 1), the link covariate.
    pub ln_d1: f64,
    /// Final child count for fully observed tweets; observed-so-far count
    /// for partially observed ones.
    pub m_obs: u64,
    /// log(t^x - T_j) for partially observed tweets (-inf if the vertex
    /// joined exactly at the horizon); NaN for fully observed tweets,
    /// which have no censoring terms.
    pub ln_elapsed: f64,
}

/// One cascade flattened for the sweep. For partially observed tweets the
/// vertex list covers the observed prefix only, in observation order.
#[derive(Debug, Clone)]
pub struct PreparedTweet {
    pub tweet_id: String,
    pub dataset_index: usize,
    pub role: Role,
    pub vertices: Vec<PreparedVertex>,
    /// Log reaction times of the (observed) non-root vertices.
    pub ln_reactions: Vec<f64>,
    pub sum_ln_s: f64,
    pub sum_ln_s_sq: f64,
}

impl PreparedTweet {
    pub fn n_reactions(&self) -> u64 {
        self.ln_reactions.len() as u64
    }

    /// Squared deviations of the log reactions around a center, from the
    /// precomputed sufficient statistics.
    fn sq_dev(&self, center: f64) -> f64 {
        (self.sum_ln_s_sq - 2.0 * center * self.sum_ln_s
            + self.n_reactions() as f64 * center * center)
            .max(0.0)
    }
}

/// The dataset in sweep form.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub tweets: Vec<PreparedTweet>,
    pub n_vertices_total: u64,
}

impl PreparedDataset {
    /// Flatten a dataset whose structures are derived and whose prediction
    /// cascades have observation windows attached.
    pub fn new(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Dataset("cannot sample over an empty corpus".into()));
        }
        let mut tweets = Vec::with_capacity(ds.len());
        let mut n_vertices_total = 0u64;
        for i in 0..ds.len() {
            let g = &ds.cascades[i];
            let st = g.structure()?;
            let mut vertices;
            let mut ln_reactions;
            match ds.roles[i] {
                Role::Training => {
                    vertices = Vec::with_capacity(g.n_vertices());
                    for j in 0..g.n_vertices() {
                        vertices.push(PreparedVertex {
                            followers: g.followers(j),
                            ln_f1: (g.followers(j) as f64 + 1.0).ln(),
                            ln_d1: (st.depths[j] as f64 + 1.0).ln(),
                            m_obs: st.out_degrees[j],
                            ln_elapsed: f64::NAN,
                        });
                    }
                    ln_reactions = Vec::with_capacity(g.n_vertices() - 1);
                    for j in 1..g.n_vertices() {
                        ln_reactions.push(st.reaction_times[j].ln());
                    }
                }
                Role::Prediction => {
                    let obs = ds.observations[i].as_ref().ok_or_else(|| {
                        Error::Dataset(format!(
                            "prediction cascade {} has no observation window attached",
                            g.tweet_id
                        ))
                    })?;
                    vertices = Vec::with_capacity(obs.vertices.len());
                    ln_reactions = Vec::with_capacity(obs.vertices.len() - 1);
                    for (slot, &v) in obs.vertices.iter().enumerate() {
                        if g.time(v) > obs.observation_time {
                            return Err(Error::InvalidCascade {
                                tweet_id: g.tweet_id.clone(),
                                what: format!(
                                    "observed vertex {} joined after the horizon",
                                    g.user_id(v)
                                ),
                            });
                        }
                        vertices.push(PreparedVertex {
                            followers: g.followers(v),
                            ln_f1: (g.followers(v) as f64 + 1.0).ln(),
                            ln_d1: (st.depths[v] as f64 + 1.0).ln(),
                            m_obs: obs.observed_children[slot],
                            ln_elapsed: (obs.observation_time - g.time(v)).ln(),
                        });
                        if slot > 0 {
                            ln_reactions.push(st.reaction_times[v].ln());
                        }
                    }
                }
            }
            n_vertices_total += vertices.len() as u64;
            let sum_ln_s: f64 = ln_reactions.iter().sum();
            let sum_ln_s_sq: f64 = ln_reactions.iter().map(|u| u * u).sum();
            tweets.push(PreparedTweet {
                tweet_id: g.tweet_id.clone(),
                dataset_index: i,
                role: ds.roles[i],
                vertices,
                ln_reactions,
                sum_ln_s,
                sum_ln_s_sq,
            });
        }
        Ok(PreparedDataset {
            tweets,
            n_vertices_total,
        })
    }
}

/// Complete sampler state for one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub globals: GlobalParams,
    /// Branching rate of the Poisson baseline (carried but unused by the
    /// full model).
    pub lambda: f64,
    pub tweets: Vec<TweetParams>,
    pub users: Vec<Vec<UserParams>>,
}

/// Accept/propose counter for one Metropolis family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub accepted: u64,
    pub proposed: u64,
}

impl Tally {
    fn add(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    fn merge(&mut self, other: Tally) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Acceptance tallies by Metropolis family.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptanceStats {
    pub a_tau: Tally,
    pub alpha_x: Tally,
    pub tau_x: Tally,
    pub logit_b: Tally,
    pub m: Tally,
}

impl AcceptanceStats {
    fn merge(&mut self, other: AcceptanceStats) {
        self.a_tau.merge(other.a_tau);
        self.alpha_x.merge(other.alpha_x);
        self.tau_x.merge(other.tau_x);
        self.logit_b.merge(other.logit_b);
        self.m.merge(other.m);
    }

    fn merged(mut self, other: AcceptanceStats) -> AcceptanceStats {
        self.merge(other);
        self
    }

    pub fn families(&self) -> [(&'static str, Tally); 5] {
        [
            ("a_tau", self.a_tau),
            ("alpha_x", self.alpha_x),
            ("tau_x", self.tau_x),
            ("logit_b", self.logit_b),
            ("m", self.m),
        ]
    }
}

/// One kept draw. `m_totals[i]` sums the final child counts over tweet i's
/// (observed) vertices — the quantity forecasts aggregate; `latent_m`
/// holds the per-vertex counts of partially observed tweets when retention
/// is on (inner vectors are empty for fully observed tweets, whose counts
/// are data).
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub iteration: u64,
    pub globals: GlobalParams,
    pub lambda: f64,
    pub tweets: Vec<TweetParams>,
    pub m_totals: Vec<u64>,
    pub latent_m: Option<Vec<Vec<u64>>>,
}

/// Kept draws and bookkeeping of one chain.
#[derive(Debug, Clone)]
pub struct ChainSamples {
    pub chain: u64,
    pub records: Vec<SampleRecord>,
    pub acceptance: AcceptanceStats,
    pub constraint_violations: u64,
}

/// Fit summary from the deviance D = -2 log p(data | state), accumulated
/// online over kept draws: the posterior mean deviance, the deviance at
/// the posterior mean state, and the derived effective parameter count
/// and deviance information criterion.
#[derive(Debug, Clone, Copy)]
pub struct FitSummary {
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    pub n_samples: u64,
}

impl FitSummary {
    /// Average data log likelihood over kept draws.
    pub fn avg_loglik(&self) -> f64 {
        -0.5 * self.mean_deviance
    }

    pub fn effective_params(&self) -> f64 {
        self.mean_deviance - self.deviance_at_mean
    }

    pub fn dic(&self) -> f64 {
        self.mean_deviance + self.effective_params()
    }
}

/// Pooled posterior output of all chains.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub model: ModelKind,
    pub tweet_ids: Vec<String>,
    pub tweet_roles: Vec<Role>,
    pub chains: Vec<ChainSamples>,
    pub fit: FitSummary,
}

impl PosteriorSamples {
    /// Names of the corpus-level parameters the fitted model actually
    /// updates, in reporting order.
    pub fn global_names(&self) -> Vec<&'static str> {
        match self.model {
            ModelKind::Full => vec![
                "alpha", "sigma_delta", "a_tau", "b_tau", "beta0", "beta_f", "beta_d", "sigma_b",
            ],
            ModelKind::Poisson => vec!["alpha", "sigma_delta", "a_tau", "b_tau", "lambda"],
        }
    }

    /// Per-chain traces of one named corpus-level parameter.
    pub fn global_traces(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let extract: fn(&SampleRecord) -> f64 = match name {
            "alpha" => |r| r.globals.alpha,
            "sigma_delta" => |r| r.globals.sigma_delta,
            "a_tau" => |r| r.globals.a_tau,
            "b_tau" => |r| r.globals.b_tau,
            "beta0" => |r| r.globals.beta0,
            "beta_f" => |r| r.globals.beta_f,
            "beta_d" => |r| r.globals.beta_d,
            "sigma_b" => |r| r.globals.sigma_b,
            "lambda" => |r| r.lambda,
            _ => {
                return Err(Error::Diagnostics(format!(
                    "unknown corpus-level parameter '{name}'"
                )))
            }
        };
        Ok(self
            .chains
            .iter()
            .map(|c| c.records.iter().map(extract).collect())
            .collect())
    }

    /// Potential scale reduction factor of every updated corpus-level
    /// parameter.
    pub fn global_rhat(&self) -> Result<Vec<(&'static str, f64)>> {
        self.global_names()
            .into_iter()
            .map(|name| Ok((name, diagnostics::gelman_rubin(&self.global_traces(name)?)?)))
            .collect()
    }

    /// Pooled posterior draws of one named corpus-level parameter across
    /// all chains.
    pub fn pooled_global(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.global_traces(name)?.into_iter().flatten().collect())
    }

    pub fn total_violations(&self) -> u64 {
        self.chains.iter().map(|c| c.constraint_violations).sum()
    }

    pub fn pooled_acceptance(&self) -> AcceptanceStats {
        self.chains
            .iter()
            .map(|c| c.acceptance)
            .fold(AcceptanceStats::default(), AcceptanceStats::merged)
    }
}

// ---------------------------------------------------------------------------
// deviance bookkeeping
// ---------------------------------------------------------------------------

/// Data log likelihood of a full sampler state: reaction terms of every
/// (observed) reaction time, plus the branching terms — exact counts for
/// fully observed tweets, combinatorial + censoring factors for partially
/// observed ones.
fn data_loglik(
    prep: &PreparedDataset,
    tweets: &[TweetParams],
    users: &[Vec<UserParams>],
    lambda: f64,
    model: ModelKind,
) -> f64 {
    let mut ll = 0.0;
    for ((pt, tp), us) in prep.tweets.iter().zip(tweets).zip(users) {
        let n = pt.n_reactions() as f64;
        ll += -n * (tp.tau_x.ln() + 0.5 * stats::LN_2PI)
            - pt.sq_dev(tp.alpha_x) / (2.0 * tp.tau_x * tp.tau_x);
        match pt.role {
            Role::Training => {
                for (v, u) in pt.vertices.iter().zip(us) {
                    ll += match model {
                        ModelKind::Full => stats::binomial_logpmf_logit(u.m, v.followers, u.logit_b),
                        ModelKind::Poisson => stats::poisson_logpmf(u.m, lambda),
                    };
                }
            }
            Role::Prediction => {
                for (v, u) in pt.vertices.iter().zip(us) {
                    if u.m > v.m_obs {
                        ll += stats::ln_choose(u.m, v.m_obs)
                            + (u.m - v.m_obs) as f64
                                * stats::normal_log_sf(v.ln_elapsed, tp.alpha_x, tp.tau_x);
                    }
                }
            }
        }
    }
    ll
}

/// Online accumulator for the fit summary: running deviance mean plus the
/// parameter means needed to evaluate the deviance at the posterior mean.
#[derive(Debug, Clone)]
pub(crate) struct DevianceAccum {
    n: u64,
    sum_dev: f64,
    sum_lambda: f64,
    sum_alpha_x: Vec<f64>,
    sum_tau_x: Vec<f64>,
    sum_logit_b: Vec<Vec<f64>>,
    sum_m: Vec<Vec<f64>>,
}

impl DevianceAccum {
    fn new(prep: &PreparedDataset) -> Self {
        DevianceAccum {
            n: 0,
            sum_dev: 0.0,
            sum_lambda: 0.0,
            sum_alpha_x: vec![0.0; prep.tweets.len()],
            sum_tau_x: vec![0.0; prep.tweets.len()],
            sum_logit_b: prep.tweets.iter().map(|t| vec![0.0; t.vertices.len()]).collect(),
            sum_m: prep.tweets.iter().map(|t| vec![0.0; t.vertices.len()]).collect(),
        }
    }

    fn update(&mut self, prep: &PreparedDataset, state: &ChainState, model: ModelKind) {
        self.n += 1;
        self.sum_dev +=
            -2.0 * data_loglik(prep, &state.tweets, &state.users, state.lambda, model);
        self.sum_lambda += state.lambda;
        for (i, tp) in state.tweets.iter().enumerate() {
            self.sum_alpha_x[i] += tp.alpha_x;
            self.sum_tau_x[i] += tp.tau_x;
        }
        for (i, us) in state.users.iter().enumerate() {
            for (j, u) in us.iter().enumerate() {
                self.sum_logit_b[i][j] += u.logit_b;
                self.sum_m[i][j] += u.m as f64;
            }
        }
    }

    fn merge(&mut self, other: &DevianceAccum) {
        self.n += other.n;
        self.sum_dev += other.sum_dev;
        self.sum_lambda += other.sum_lambda;
        for (a, b) in self.sum_alpha_x.iter_mut().zip(&other.sum_alpha_x) {
            *a += b;
        }
        for (a, b) in self.sum_tau_x.iter_mut().zip(&other.sum_tau_x) {
            *a += b;
        }
        for (row_a, row_b) in self.sum_logit_b.iter_mut().zip(&other.sum_logit_b) {
            for (a, b) in row_a.iter_mut().zip(row_b) {
                *a += b;
            }
        }
        for (row_a, row_b) in self.sum_m.iter_mut().zip(&other.sum_m) {
            for (a, b) in row_a.iter_mut().zip(row_b) {
                *a += b;
            }
        }
    }

    /// Evaluate the summary: the posterior-mean state uses the mean of
    /// each continuous parameter and rounds each latent count to the
    /// nearest admissible integer.
    fn finalize(&self, prep: &PreparedDataset, model: ModelKind) -> FitSummary {
        let n = self.n as f64;
        let tweets: Vec<TweetParams> = self
            .sum_alpha_x
            .iter()
            .zip(&self.sum_tau_x)
            .map(|(&sa, &st)| TweetParams {
                alpha_x: sa / n,
                tau_x: st / n,
            })
            .collect();
        let users: Vec<Vec<UserParams>> = prep
            .tweets
            .iter()
            .enumerate()
            .map(|(i, pt)| {
                pt.vertices
                    .iter()
                    .enumerate()
                    .map(|(j, v)| UserParams {
                        logit_b: self.sum_logit_b[i][j] / n,
                        m: ((self.sum_m[i][j] / n).round() as u64)
                            .clamp(v.m_obs, v.followers.max(v.m_obs)),
                    })
                    .collect()
            })
            .collect();
        let dev_at_mean =
            -2.0 * data_loglik(prep, &tweets, &users, self.sum_lambda / n, model);
        FitSummary {
            mean_deviance: self.sum_dev / n,
            deviance_at_mean: dev_at_mean,
            n_samples: self.n,
        }
    }
}

// ---------------------------------------------------------------------------
// initialization and the three sweep phases
// ---------------------------------------------------------------------------

/// Draw a chain's starting state: overdispersed jitter around data-derived
/// anchors, with chain c's jitter inflated by (1 + c/2) so later chains
/// start further out and agreement across chains is informative.
/// Anchoring matters: starts drawn straight from the diffuse hyperpriors
/// can put the link block hundreds of prior standard deviations from the
/// data, a regime the prior-proposal Metropolis updates leave only at a
/// crawl.
///
/// Reaction side: anchors come from the per-tweet mean log reaction
/// times. Tweet parameters start at their per-tweet log-normal fit when
/// at least two reactions are available (variance floored at 0.05^2); a
/// lone reaction pins alpha_x to it; a tweet with no reactions draws from
/// the initialized hierarchy.
///
/// Link side: each vertex gets an empirical-logit anchor
/// logit((m + 1/2)/(f + 1)); the regression coefficients start at a draw
/// from their own conditional given those anchors, and the link noise
/// scale starts at the anchors' residual spread. Starting the vertex
/// probabilities at a link drawn blind is not a harmless dispersion: with
/// thousands of vertices whose probabilities then match that blind link,
/// the noise-scale and coefficient conditionals reproduce it, and the
/// binomial-gated walk back to values the counts support can take more
/// sweeps than any realistic run. Latent counts start at their observed
/// floor for the same reason (see below).
fn init_state(
    prep: &PreparedDataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
    chain: u64,
) -> Result<ChainState> {
    use steps::NormalParams;
    let spread = 1.0 + chain as f64 / 2.0;
    let key = |tweet: u64| StreamKey {
        chain,
        iteration: 0,
        phase: Phase::Init,
        tweet,
        vertex: 0,
    };

    let tweet_means: Vec<f64> = prep
        .tweets
        .iter()
        .filter(|t| t.n_reactions() >= 1)
        .map(|t| t.sum_ln_s / t.n_reactions() as f64)
        .collect();
    let anchor_alpha = if tweet_means.is_empty() {
        hp.mu_alpha.clamp(-10.0, 10.0)
    } else {
        tweet_means.iter().sum::<f64>() / tweet_means.len() as f64
    };
    let anchor_sd = if tweet_means.len() >= 2 {
        let v = tweet_means.iter().map(|a| (a - anchor_alpha).powi(2)).sum::<f64>()
            / (tweet_means.len() - 1) as f64;
        v.sqrt().max(0.3)
    } else {
        1.0
    };

    let anchor_rows: Vec<(f64, f64, f64)> = prep
        .tweets
        .iter()
        .flat_map(|pt| pt.vertices.iter())
        .map(|v| {
            let y = ((v.m_obs as f64 + 0.5) / (v.followers as f64 + 1.0))
                .clamp(1e-12, 1.0 - 1e-12);
            ((y / (1.0 - y)).ln(), v.ln_f1, v.ln_d1)
        })
        .collect();
    let mean_m = if anchor_rows.is_empty() {
        0.0
    } else {
        prep.tweets
            .iter()
            .flat_map(|pt| pt.vertices.iter())
            .map(|v| v.m_obs as f64)
            .sum::<f64>()
            / anchor_rows.len() as f64
    };

    let mut grng = stream_rng(config.seed, key(0));
    let (beta_hat, link_resid_sd) = if anchor_rows.is_empty() {
        ((0.0, 0.0, 0.0), 1.5)
    } else {
        let b = steps::sample_betas(&mut grng, &anchor_rows, 1.0, hp)?;
        let rss: f64 = anchor_rows
            .iter()
            .map(|&(y, u, w)| (y - b.0 - b.1 * u - b.2 * w).powi(2))
            .sum();
        (b, (rss / anchor_rows.len() as f64).sqrt().max(0.5))
    };

    let mut z = move || steps::sample_normal(&mut grng, NormalParams { mean: 0.0, sd: 1.0 });
    let alpha = anchor_alpha + z() * anchor_sd * spread;
    let sigma_delta = anchor_sd * (z() * 0.4 * spread).exp();
    let a_tau = (z() * 0.75 * spread).exp();
    let b_tau = 2.0 * (z() * 0.75 * spread).exp();
    let beta0 = beta_hat.0 + z() * 0.3 * spread;
    let beta_f = beta_hat.1 + z() * 0.15 * spread;
    let beta_d = beta_hat.2 + z() * 0.3 * spread;
    let sigma_b = link_resid_sd * (z() * 0.3 * spread).exp();
    let lambda = (mean_m + 0.05) * (z() * 0.3 * spread).exp();
    let globals = GlobalParams {
        alpha,
        sigma_delta,
        a_tau,
        b_tau,
        beta0,
        beta_f,
        beta_d,
        sigma_b,
    };

    let mut tweets = Vec::with_capacity(prep.tweets.len());
    let mut users = Vec::with_capacity(prep.tweets.len());
    for (i, pt) in prep.tweets.iter().enumerate() {
        let mut trng = stream_rng(config.seed, key(i as u64 + 1));
        let n = pt.n_reactions();
        let tp = if n >= 2 {
            let mean = pt.sum_ln_s / n as f64;
            let var = (pt.sum_ln_s_sq / n as f64 - mean * mean).max(0.0);
            TweetParams { alpha_x: mean, tau_x: var.sqrt().max(0.05) }
        } else {
            let alpha_x = if n == 1 {
                pt.ln_reactions[0]
            } else {
                steps::sample_normal(&mut trng, NormalParams { mean: alpha, sd: sigma_delta })
            };
            let tau_x = stats::sample_inv_gamma(&mut trng, a_tau, b_tau).sqrt();
            TweetParams { alpha_x, tau_x }
        };
        tweets.push(tp);

        let mut us = Vec::with_capacity(pt.vertices.len());
        for v in &pt.vertices {
            let p = ((v.m_obs as f64 + 0.5) / (v.followers as f64 + 1.0))
                .clamp(1e-12, 1.0 - 1e-12);
            let anchor = (p / (1.0 - p)).ln();
            let logit_b = anchor
                + steps::sample_normal(&mut trng, NormalParams { mean: 0.0, sd: 0.5 });
            // counts start at the observed floor rather than at the link
            // prior's mean: a jittered link can put a heavy-follower
            // vertex's initial count in the hundreds of thousands, and the
            // count and its retweet probability then pin each other there
            // (the binomial likelihood confines b to M/f and the proposals
            // recenter M on f·b) for far longer than any realistic run
            us.push(UserParams { logit_b, m: v.m_obs });
        }
        users.push(us);
    }

    Ok(ChainState { globals, lambda, tweets, users })
}

/// Phase 1: the serial corpus-level block.
#[allow(clippy::too_many_arguments)]
fn update_globals(
    state: &mut ChainState,
    prep: &PreparedDataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
    chain: u64,
    iteration: u64,
    rows: &mut Vec<(f64, f64, f64)>,
    acceptance: &mut AcceptanceStats,
) -> Result<()> {
    let mut rng = stream_rng(
        config.seed,
        StreamKey { chain, iteration, phase: Phase::Globals, tweet: 0, vertex: 0 },
    );

    match config.model {
        ModelKind::Full => {
            rows.clear();
            for (pt, us) in prep.tweets.iter().zip(&state.users) {
                for (v, u) in pt.vertices.iter().zip(us) {
                    rows.push((u.logit_b, v.ln_f1, v.ln_d1));
                }
            }
            let (b0, bf, bd) = steps::sample_betas(&mut rng, rows, state.globals.sigma_b, hp)?;
            state.globals.beta0 = b0;
            state.globals.beta_f = bf;
            state.globals.beta_d = bd;

            let residual_sq: f64 = rows
                .iter()
                .map(|&(y, u, w)| {
                    let mu = b0 + bf * u + bd * w;
                    (y - mu) * (y - mu)
                })
                .sum();
            let p = steps::sigma_b2_conditional(prep.n_vertices_total, residual_sq, hp);
            state.globals.sigma_b = steps::sample_inv_gamma(&mut rng, p).sqrt();
        }
        ModelKind::Poisson => {
            let sum_m: u64 = state.users.iter().flatten().map(|u| u.m).sum();
            let p = steps::lambda_conditional(prep.n_vertices_total, sum_m, hp);
            state.lambda = steps::sample_gamma(&mut rng, p)?;
        }
    }

    let n_tweets = state.tweets.len() as u64;
    let sum_alpha_x: f64 = state.tweets.iter().map(|t| t.alpha_x).sum();
    state.globals.alpha = steps::sample_normal(
        &mut rng,
        steps::alpha_conditional(n_tweets, sum_alpha_x, state.globals.sigma_delta, hp),
    );

    let sq_dev: f64 = state
        .tweets
        .iter()
        .map(|t| (t.alpha_x - state.globals.alpha).powi(2))
        .sum();
    state.globals.sigma_delta = steps::sample_inv_gamma(
        &mut rng,
        steps::sigma_delta2_conditional(n_tweets, sq_dev, hp),
    )
    .sqrt();

    let sum_ln_var: f64 = state.tweets.iter().map(|t| (t.tau_x * t.tau_x).ln()).sum();
    let (a_tau, accepted) = steps::mh_a_tau(
        &mut rng,
        state.globals.a_tau,
        n_tweets,
        sum_ln_var,
        state.globals.b_tau,
        hp,
        config.rw_step_a_tau,
    );
    state.globals.a_tau = a_tau;
    acceptance.a_tau.add(accepted);

    let sum_inv_var: f64 = state.tweets.iter().map(|t| 1.0 / (t.tau_x * t.tau_x)).sum();
    state.globals.b_tau = steps::sample_gamma(
        &mut rng,
        steps::b_tau_conditional(n_tweets, a_tau, sum_inv_var, hp),
    )?;
    Ok(())
}

/// Censoring terms a partially observed tweet currently owes: one
/// (log elapsed, children still to come) pair per vertex with m > m_obs.
fn pending_terms(pt: &PreparedTweet, users: &[UserParams]) -> Vec<(f64, f64)> {
    pt.vertices
        .iter()
        .zip(users)
        .filter(|(v, u)| u.m > v.m_obs)
        .map(|(v, u)| (v.ln_elapsed, (u.m - v.m_obs) as f64))
        .collect()
}

/// Phase 2: per-tweet reaction parameters, parallel across tweets.
fn update_tweets(
    state: &mut ChainState,
    prep: &PreparedDataset,
    config: &SamplerConfig,
    chain: u64,
    iteration: u64,
) -> AcceptanceStats {
    let globals = state.globals;
    let seed = config.seed;
    state
        .tweets
        .par_iter_mut()
        .zip(state.users.par_iter())
        .zip(prep.tweets.par_iter())
        .enumerate()
        .map(|(i, ((tp, users), pt))| {
            let mut tally = AcceptanceStats::default();
            let mut rng = stream_rng(
                seed,
                StreamKey {
                    chain,
                    iteration,
                    phase: Phase::Tweets,
                    tweet: i as u64,
                    vertex: 0,
                },
            );
            match pt.role {
                Role::Training => {
                    let cond = steps::alpha_x_training_conditional(
                        pt.n_reactions(),
                        pt.sum_ln_s,
                        tp.tau_x,
                        globals.alpha,
                        globals.sigma_delta,
                    );
                    tp.alpha_x = steps::sample_normal(&mut rng, cond);
                    let cond = steps::tau_x2_training_conditional(
                        pt.n_reactions(),
                        pt.sq_dev(tp.alpha_x),
                        globals.a_tau,
                        globals.b_tau,
                    );
                    tp.tau_x = steps::sample_inv_gamma(&mut rng, cond).sqrt();
                }
                Role::Prediction => {
                    let pending = pending_terms(pt, users);
                    let (alpha_x, acc) = steps::mh_alpha_x_pred(
                        &mut rng,
                        tp.alpha_x,
                        tp.tau_x,
                        globals.alpha,
                        globals.sigma_delta,
                        &pt.ln_reactions,
                        &pending,
                        config.rw_step_alpha_x,
                    );
                    tp.alpha_x = alpha_x;
                    tally.alpha_x.add(acc);

                    let (tau_x, acc) = steps::mh_tau_x2_pred(
                        &mut rng,
                        tp.tau_x,
                        tp.alpha_x,
                        globals.a_tau,
                        globals.b_tau,
                        &pt.ln_reactions,
                        &pending,
                    );
                    tp.tau_x = tau_x;
                    tally.tau_x.add(acc);
                }
            }
            tally
        })
        .reduce(AcceptanceStats::default, AcceptanceStats::merged)
}

/// Phase 3: per-vertex retweet probabilities and final counts, parallel
/// across tweets.
fn update_vertices(
    state: &mut ChainState,
    prep: &PreparedDataset,
    config: &SamplerConfig,
    chain: u64,
    iteration: u64,
) -> Result<AcceptanceStats> {
    let globals = state.globals;
    let lambda = state.lambda;
    let model = config.model;
    let seed = config.seed;
    state
        .users
        .par_iter_mut()
        .zip(state.tweets.par_iter())
        .zip(prep.tweets.par_iter())
        .enumerate()
        .map(|(i, ((users, tp), pt))| {
            let mut tally = AcceptanceStats::default();
            if model == ModelKind::Poisson && pt.role == Role::Training {
                return Ok(tally); // counts are data; nothing to update
            }
            for (j, (v, u)) in pt.vertices.iter().zip(users.iter_mut()).enumerate() {
                let mut rng = stream_rng(
                    seed,
                    StreamKey {
                        chain,
                        iteration,
                        phase: Phase::Vertices,
                        tweet: i as u64,
                        vertex: j as u64,
                    },
                );
                if model == ModelKind::Full {
                    let mu = globals.beta0 + globals.beta_f * v.ln_f1 + globals.beta_d * v.ln_d1;
                    let (logit_b, acc) =
                        steps::mh_logit_b(&mut rng, u.logit_b, u.m, v.followers, mu, globals.sigma_b);
                    u.logit_b = logit_b;
                    tally.logit_b.add(acc);
                }
                if pt.role == Role::Prediction {
                    let ln_q = stats::normal_log_sf(v.ln_elapsed, tp.alpha_x, tp.tau_x);
                    let (m, acc) = match model {
                        ModelKind::Full => {
                            steps::mh_m_binomial(&mut rng, u.m, v.m_obs, v.followers, u.b(), ln_q)
                        }
                        ModelKind::Poisson => {
                            steps::mh_m_poisson(&mut rng, u.m, v.m_obs, lambda, ln_q)?
                        }
                    };
                    u.m = m;
                    tally.m.add(acc);
                }
            }
            Ok(tally)
        })
        .try_reduce(AcceptanceStats::default, |a, b| Ok(a.merged(b)))
}

/// Count of vertices whose final count sits outside its admissible range
/// (never below the observed count, never above the follower count, and
/// frozen at the data for fully observed tweets).
fn count_violations(state: &ChainState, prep: &PreparedDataset) -> u64 {
    let mut bad = 0u64;
    for (pt, us) in prep.tweets.iter().zip(&state.users) {
        for (v, u) in pt.vertices.iter().zip(us) {
            let ok = match pt.role {
                Role::Training => u.m == v.m_obs,
                Role::Prediction => u.m >= v.m_obs && u.m <= v.followers.max(v.m_obs),
            };
            bad += !ok as u64;
        }
    }
    bad
}

fn run_chain_inner(
    prep: &PreparedDataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
    chain: u64,
) -> Result<(ChainSamples, DevianceAccum)> {
    let mut state = init_state(prep, config, hp, chain)?;
    let mut acceptance = AcceptanceStats::default();
    let mut accum = DevianceAccum::new(prep);
    let mut records = Vec::with_capacity(config.n_kept() as usize);
    let mut violations = 0u64;
    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(prep.n_vertices_total as usize);

    for iteration in 1..=config.n_iterations {
        update_globals(&mut state, prep, config, hp, chain, iteration, &mut rows, &mut acceptance)?;
        let t2 = update_tweets(&mut state, prep, config, chain, iteration);
        acceptance.merge(t2);
        let t3 = update_vertices(&mut state, prep, config, chain, iteration)?;
        acceptance.merge(t3);

        if config.check_constraints {
            violations += count_violations(&state, prep);
        }
        if config.keeps(iteration) {
            accum.update(prep, &state, config.model);
            let m_totals: Vec<u64> = state
                .users
                .iter()
                .map(|us| us.iter().map(|u| u.m).sum())
                .collect();
            let latent_m = config.keep_latent_m.then(|| {
                prep.tweets
                    .iter()
                    .zip(&state.users)
                    .map(|(pt, us)| match pt.role {
                        Role::Prediction => us.iter().map(|u| u.m).collect(),
                        Role::Training => Vec::new(),
                    })
                    .collect()
            });
            records.push(SampleRecord {
                iteration,
                globals: state.globals,
                lambda: state.lambda,
                tweets: state.tweets.clone(),
                m_totals,
                latent_m,
            });
        }
    }

    Ok((
        ChainSamples { chain, records, acceptance, constraint_violations: violations },
        accum,
    ))
}

/// Run one chain to completion, returning its kept draws and its own fit
/// summary.
pub fn run_chain(
    prep: &PreparedDataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
    chain: u64,
) -> Result<(ChainSamples, FitSummary)> {
    config.validate()?;
    let (samples, accum) = run_chain_inner(prep, config, hp, chain)?;
    let fit = accum.finalize(prep, config.model);
    Ok((samples, fit))
}

/// Run all chains (in parallel) over an already-flattened corpus and pool
/// their fit summaries.
pub fn run_chains_prepared(
    prep: &PreparedDataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let results: Result<Vec<(ChainSamples, DevianceAccum)>> = (0..config.n_chains)
        .into_par_iter()
        .map(|chain| run_chain_inner(prep, config, hp, chain))
        .collect();
    let results = results?;

    let mut pooled = DevianceAccum::new(prep);
    for (_, accum) in &results {
        pooled.merge(accum);
    }
    let fit = pooled.finalize(prep, config.model);
    Ok(PosteriorSamples {
        model: config.model,
        tweet_ids: prep.tweets.iter().map(|t| t.tweet_id.clone()).collect(),
        tweet_roles: prep.tweets.iter().map(|t| t.role).collect(),
        chains: results.into_iter().map(|(c, _)| c).collect(),
        fit,
    })
}

/// Flatten the dataset and run all chains.
pub fn run_chains(
    ds: &Dataset,
    config: &SamplerConfig,
    hp: &Hyperpriors,
) -> Result<PosteriorSamples> {
    let prep = PreparedDataset::new(ds)?;
    run_chains_prepared(&prep, config, hp)
}
