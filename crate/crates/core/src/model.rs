//! The hierarchical cascade model.
//!
//! A cascade x has tweet-level reaction-time parameters (alpha_x, tau_x):
//! every non-root vertex j joins after a reaction time S_j with
//! log(S_j) ~ N(alpha_x, tau_x^2). Each vertex j with f_j followers at depth
//! d_j retweets to M_j ~ Binomial(f_j, b_j) of them, where
//! logit(b_j) ~ N(mu_j, sigma_b^2) and the link mean is
//!
//!   mu_j = beta0 + beta_f * log(f_j + 1) + beta_d * log(d_j + 1).
//!
//! Across cascades, alpha_x ~ N(alpha, sigma_delta^2) and
//! tau_x^2 ~ InverseGamma(a_tau, b_tau). This module holds the parameter
//! containers, the likelihood terms for fully observed (training) and
//! partially observed (prediction) cascades, the prior densities, and a
//! forward simulator for the whole generative process.
//!
//! Convention: reaction-time densities are densities of log(S), not of S —
//! the two differ by a Jacobian that is constant in the parameters, and every
//! consumer (sampler, deviance, oracles) uses the same convention.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::data::{ObservedCascade, RetweetEvent, RetweetGraph};
use crate::error::{Error, Result};
use crate::stats;

/// Corpus-level parameters. `sigma_delta` and `sigma_b` are standard
/// deviations; the inverse-gamma pair (`a_tau`, `b_tau`) governs the
/// tweet-level reaction-time variance tau_x^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub alpha: f64,
    pub sigma_delta: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    pub beta0: f64,
    pub beta_f: f64,
    pub beta_d: f64,
    pub sigma_b: f64,
}

impl Default for GlobalParams {
    /// Parameter values typical of observed retweet corpora; used as the
    /// simulator defaults.
    fn default() -> Self {
        GlobalParams {
            alpha: 7.42,
            sigma_delta: 0.65,
            a_tau: 0.45,
            b_tau: 2.11,
            beta0: -4.61,
            beta_f: -0.28,
            beta_d: -8.22,
            sigma_b: 1.69,
        }
    }
}

impl GlobalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_delta", self.sigma_delta),
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("sigma_b", self.sigma_b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta0", self.beta0),
            ("beta_f", self.beta_f),
            ("beta_d", self.beta_d),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-tweet reaction-time parameters; `tau_x` is a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweetParams {
    pub alpha_x: f64,
    pub tau_x: f64,
}

/// Per-vertex latent state: the retweet probability (kept on the logit scale,
/// where the model's normal prior lives and where the arithmetic stays finite
/// in the tails) and the eventual child count M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserParams {
    pub logit_b: f64,
    pub m: u64,
}

impl UserParams {
    /// Retweet probability b in (0, 1).
    pub fn b(&self) -> f64 {
        stats::expit(self.logit_b)
    }
}

/// Fixed hyperprior constants for the top-level parameters:
/// alpha ~ N(mu_alpha, sigma_alpha^2), sigma_delta^2 ~ IG(a_delta, b_delta),
/// log(a_tau) ~ N(mu_a, sigma_a^2), b_tau ~ Gamma(k_b, theta_b) (scale form),
/// each beta ~ N(mu_beta, sigma_beta^2), sigma_b^2 ~ IG(a_sigma_b, b_sigma_b).
/// The last pair (`k_lambda`, `theta_lambda`) is the Gamma prior on the
/// single branching rate of the homogeneous-Poisson baseline model, which
/// replaces the whole binomial branching block when that model is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperpriors {
    pub mu_alpha: f64,
    pub sigma_alpha: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub k_b: f64,
    pub theta_b: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
    pub a_sigma_b: f64,
    pub b_sigma_b: f64,
    pub k_lambda: f64,
    pub theta_lambda: f64,
}

impl Default for Hyperpriors {
    fn default() -> Self {
        Hyperpriors {
            mu_alpha: 0.0,
            sigma_alpha: 100.0,
            a_delta: 0.5,
            b_delta: 0.5,
            mu_a: 0.0,
            sigma_a: 10.0,
            k_b: 1.0,
            theta_b: 500.0,
            mu_beta: 0.0,
            sigma_beta: 100.0,
            a_sigma_b: 0.5,
            b_sigma_b: 0.5,
            k_lambda: 1.0,
            theta_lambda: 500.0,
        }
    }
}

/// Prior mean of logit(b_j) for a vertex with `followers` followers at depth
/// `depth`.
pub fn link_mean(followers: u64, depth: u32, g: &GlobalParams) -> f64 {
    g.beta0
        + g.beta_f * ((followers as f64) + 1.0).ln()
        + g.beta_d * ((depth as f64) + 1.0).ln()
}

/// Log density of an observed reaction time `s` (seconds) under the tweet's
/// log-normal: the density of log(s) under N(alpha_x, tau_x^2).
pub fn reaction_logpdf(s: f64, tp: &TweetParams) -> Result<f64> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "reaction time must be positive, got {s}"
        )));
    }
    Ok(stats::normal_logpdf(s.ln(), tp.alpha_x, tp.tau_x))
}

/// log(1 - F(u)) where F is the CDF of log reaction times, i.e. the log
/// probability that a reaction exceeds e^u seconds. `u` is in log-seconds and
/// may be -inf (elapsed time zero), which correctly yields survival one.
pub fn reaction_log_survival(u: f64, tp: &TweetParams) -> f64 {
    stats::normal_log_sf(u, tp.alpha_x, tp.tau_x)
}

/// Log likelihood of a fully observed cascade: the log-normal term of every
/// reaction time plus the binomial term of every vertex's final child count.
/// `users` must hold one entry per vertex, and each `users[j].m` must not
/// exceed the vertex's follower count.
pub fn training_loglik(
    graph: &RetweetGraph,
    tp: &TweetParams,
    users: &[UserParams],
) -> Result<f64> {
    let st = graph.structure()?;
    if users.len() != graph.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "tweet {}: expected {} user states, got {}",
            graph.tweet_id,
            graph.n_vertices(),
            users.len()
        )));
    }
    let mut ll = 0.0;
    for j in 1..graph.n_vertices() {
        ll += reaction_logpdf(st.reaction_times[j], tp)?;
    }
    for (j, u) in users.iter().enumerate() {
        let f = graph.followers(j);
        if u.m > f {
            return Err(Error::InvalidArgument(format!(
                "tweet {}: vertex {j} has m = {} > followers = {f}",
                graph.tweet_id, u.m
            )));
        }
        ll += stats::binomial_logpmf_logit(u.m, f, u.logit_b);
    }
    Ok(ll)
}

/// Log likelihood of an observed prefix, conditional on the eventual child
/// counts `m_final` (one per observed vertex, in observation order): the
/// log-normal term of each observed reaction time, plus, per observed vertex,
/// the count of ways to choose which children were early and the survival
/// probability of the children still to come,
///
///   ln C(M_j, m_j) + (M_j - m_j) * ln(1 - F(log(t - T_j))).
///
/// A vertex observed exactly at the horizon (t == T_j) contributes survival
/// one; a vertex observed after the horizon is an error.
pub fn prediction_loglik(
    graph: &RetweetGraph,
    obs: &ObservedCascade,
    tp: &TweetParams,
    m_final: &[u64],
) -> Result<f64> {
    let st = graph.structure()?;
    if m_final.len() != obs.vertices.len() {
        return Err(Error::InvalidArgument(format!(
            "tweet {}: expected {} final counts, got {}",
            graph.tweet_id,
            obs.vertices.len(),
            m_final.len()
        )));
    }
    let t = obs.observation_time;
    let mut ll = 0.0;
    for (slot, &v) in obs.vertices.iter().enumerate() {
        if slot > 0 {
            ll += reaction_logpdf(st.reaction_times[v], tp)?;
        }
        let m_obs = obs.observed_children[slot];
        let m_fin = m_final[slot];
        if m_fin < m_obs {
            return Err(Error::InvalidArgument(format!(
                "tweet {}: vertex {v} has final count {m_fin} below observed count {m_obs}",
                graph.tweet_id
            )));
        }
        if graph.time(v) > t {
            return Err(Error::InvalidArgument(format!(
                "tweet {}: vertex {v} observed at {} after the horizon {t}",
                graph.tweet_id,
                graph.time(v)
            )));
        }
        if m_fin > m_obs {
            let log_elapsed = (t - graph.time(v)).ln();
            ll += stats::ln_choose(m_fin, m_obs)
                + (m_fin - m_obs) as f64 * reaction_log_survival(log_elapsed, tp);
        }
    }
    Ok(ll)
}

/// Log hyperprior density of the global parameters. The scale parameters are
/// measured on the variance scale (sigma_delta^2, sigma_b^2 carry the
/// inverse-gamma priors) and a_tau carries the log-normal density implied by
/// log(a_tau) ~ N(mu_a, sigma_a^2).
pub fn log_global_prior(g: &GlobalParams, hp: &Hyperpriors) -> f64 {
    stats::normal_logpdf(g.alpha, hp.mu_alpha, hp.sigma_alpha)
        + stats::inv_gamma_logpdf(g.sigma_delta * g.sigma_delta, hp.a_delta, hp.b_delta)
        + stats::lognormal_variable_logpdf(g.a_tau, hp.mu_a, hp.sigma_a)
        + stats::gamma_logpdf(g.b_tau, hp.k_b, hp.theta_b)
        + stats::normal_logpdf(g.beta0, hp.mu_beta, hp.sigma_beta)
        + stats::normal_logpdf(g.beta_f, hp.mu_beta, hp.sigma_beta)
        + stats::normal_logpdf(g.beta_d, hp.mu_beta, hp.sigma_beta)
        + stats::inv_gamma_logpdf(g.sigma_b * g.sigma_b, hp.a_sigma_b, hp.b_sigma_b)
}

/// Log prior density of one tweet's parameters given the globals (normal on
/// alpha_x, inverse-gamma on the variance tau_x^2).
pub fn log_tweet_prior(tp: &TweetParams, g: &GlobalParams) -> f64 {
    stats::normal_logpdf(tp.alpha_x, g.alpha, g.sigma_delta)
        + stats::inv_gamma_logpdf(tp.tau_x * tp.tau_x, g.a_tau, g.b_tau)
}

/// Log prior of one vertex's latent state given the globals: the normal on
/// logit(b) around the link mean plus the binomial mass of its child count.
pub fn log_user_prior(u: &UserParams, mu_j: f64, sigma_b: f64, followers: u64) -> f64 {
    stats::normal_logpdf(u.logit_b, mu_j, sigma_b)
        + stats::binomial_logpmf_logit(u.m, followers, u.logit_b)
}

/// Follower-count sampler used by the simulator unless the caller supplies
/// one: log-normal with log-mean 6 and log-sd 2, rounded to an integer.
pub fn default_follower_sampler<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    let n = rand_distr::Normal::new(6.0f64, 2.0).unwrap();
    let log_followers: f64 = n.sample(rng);
    log_followers.exp().round() as u64
}

/// Hard cap on simulated cascade size; generation stops (and the result is
/// flagged truncated) once this many vertices exist.
pub const DEFAULT_MAX_NODES: usize = 10_000;

/// A simulated cascade together with the tweet-level parameters that
/// generated it and a flag marking size-capped generation.
#[derive(Debug, Clone)]
pub struct SimulatedCascade {
    pub graph: RetweetGraph,
    pub truncated: bool,
    pub alpha_x: f64,
    pub tau_x: f64,
}

/// Draw one cascade from the full generative process: tweet parameters from
/// their priors, then a breadth-first branching process in which every vertex
/// draws followers, a retweet probability and a binomial child count, and
/// every child arrives after a log-normal reaction time. Generation stops
/// when no vertex has children left to bear or `max_nodes` is reached.
///
/// The returned graph has its structure derived. Events are listed in
/// generation order, so parents always precede children.
///
/// The inverse-gamma prior on tau_x^2 is heavy-tailed enough that a rare
/// tweet draws reaction times beyond the f64 time axis; such a cascade is cut
/// at the offending child and flagged `truncated`, same as hitting
/// `max_nodes`.
pub fn simulate_cascade<R: Rng + ?Sized>(
    tweet_id: impl Into<String>,
    g: &GlobalParams,
    max_nodes: usize,
    follower_sampler: &mut dyn FnMut(&mut R) -> u64,
    rng: &mut R,
) -> Result<SimulatedCascade> {
    g.validate()?;
    if max_nodes == 0 {
        return Err(Error::InvalidArgument("max_nodes must be at least 1".into()));
    }
    let alpha_x = rand_distr::Normal::new(g.alpha, g.sigma_delta)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(rng);
    let tau_x = stats::sample_inv_gamma(rng, g.a_tau, g.b_tau).sqrt().min(1e150);
    let logit_noise = rand_distr::Normal::new(0.0, g.sigma_b).unwrap();
    let log_reaction = rand_distr::Normal::new(alpha_x, tau_x).unwrap();

    // queue of (vertex index, remaining children); vertex 0 is the root
    let mut times = vec![0.0f64];
    let mut depths = vec![0u32];
    let mut followers = vec![follower_sampler(rng)];
    let mut parents = vec![0usize];
    let draw_children = |f: u64, d: u32, rng: &mut R| -> u64 {
        let noise: f64 = logit_noise.sample(rng);
        let b = stats::expit(link_mean(f, d, g) + noise);
        rand_distr::Binomial::new(f, b).unwrap().sample(rng)
    };
    let mut queue = std::collections::VecDeque::new();
    queue.push_back((0usize, draw_children(followers[0], 0, rng)));

    let mut truncated = false;
    'grow: while let Some((v, n_children)) = queue.pop_front() {
        for _ in 0..n_children {
            if times.len() >= max_nodes {
                truncated = true;
                break 'grow;
            }
            let s: f64 = log_reaction.sample(rng).exp();
            if !(times[v] + s).is_finite() {
                truncated = true;
                break 'grow;
            }
            let child = times.len();
            times.push(times[v] + s);
            depths.push(depths[v] + 1);
            followers.push(follower_sampler(rng));
            parents.push(v);
            queue.push_back((child, draw_children(followers[child], depths[child], rng)));
        }
    }

    let tweet_id = tweet_id.into();
    let events: Vec<RetweetEvent> = (1..times.len())
        .map(|j| RetweetEvent {
            user_id: format!("u{j}"),
            time: times[j],
            parent_user_id: if parents[j] == 0 { "u0".into() } else { format!("u{}", parents[j]) },
            followers: followers[j],
        })
        .collect();
    let mut graph = RetweetGraph::new(tweet_id, "u0", followers[0], events);
    graph.derive_structure()?;
    Ok(SimulatedCascade {
        graph,
        truncated,
        alpha_x,
        tau_x,
    })
}
