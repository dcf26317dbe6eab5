//! The individual conditional updates composing one sampler sweep.
//!
//! Every conjugate block is split into a pure function that returns the
//! conditional's parameters (so the closed forms can be pinned by tests)
//! and a thin drawing wrapper. The non-conjugate blocks are Metropolis
//! steps that return `(new_value, accepted)`; their unnormalized log
//! targets are public for the same reason.
//!
//! Inverse-gamma and gamma parameters follow the shape/scale convention
//! used throughout `stats`.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::Hyperpriors;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

fn draw_uniform_ln<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>().ln()
}

// ---------------------------------------------------------------------------
// regression coefficients (beta0, beta_f, beta_d) and their noise variance
// ---------------------------------------------------------------------------

/// Conditional of the link coefficients given every vertex's logit retweet
/// probability: a Bayesian linear regression of y_j = logit(b_j) on the
/// covariate row (1, log(f_j+1), log(d_j+1)) with noise variance sigma_b^2
/// and independent N(mu_beta, sigma_beta^2) priors on each coefficient.
///
/// Returns the posterior mean vector and covariance matrix
///   C = sigma_b^2 (X'X + r I)^{-1},   mu = (X'X + r I)^{-1} (X'y + r mu_beta 1)
/// with ridge r = sigma_b^2 / sigma_beta^2. `rows` holds (y_j, log(f_j+1),
/// log(d_j+1)); an empty slice reproduces the prior.
pub fn beta_conditional(
    rows: &[(f64, f64, f64)],
    sigma_b: f64,
    hp: &Hyperpriors,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let r = sigma_b * sigma_b / (hp.sigma_beta * hp.sigma_beta);
    let mut gram = Matrix3::from_diagonal_element(r);
    let mut rhs = Vector3::repeat(r * hp.mu_beta);
    for &(y, u, w) in rows {
        let x = Vector3::new(1.0, u, w);
        gram += x * x.transpose();
        rhs += y * x;
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::DegenerateDesign(
            "link-coefficient normal equations are not positive definite".into(),
        )
    })?;
    let mean = chol.solve(&rhs);
    let cov = chol.inverse() * (sigma_b * sigma_b);
    Ok((mean, cov))
}

/// Exact draw of (beta0, beta_f, beta_d) from [`beta_conditional`].
pub fn sample_betas<R: Rng + ?Sized>(
    rng: &mut R,
    rows: &[(f64, f64, f64)],
    sigma_b: f64,
    hp: &Hyperpriors,
) -> Result<(f64, f64, f64)> {
    let (mean, cov) = beta_conditional(rows, sigma_b, hp)?;
    let l = cov
        .cholesky()
        .ok_or_else(|| {
            Error::DegenerateDesign("link-coefficient covariance is not positive definite".into())
        })?
        .l();
    let z = Vector3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    let draw = mean + l * z;
    Ok((draw[0], draw[1], draw[2]))
}

/// Conditional of sigma_b^2 given the `n` regression residuals
/// y_j - mu_j whose squares sum to `residual_sq`: inverse-gamma with the
/// prior bumped by n/2 and half the residual sum of squares.
pub fn sigma_b2_conditional(n: u64, residual_sq: f64, hp: &Hyperpriors) -> InvGammaParams {
    InvGammaParams {
        shape: hp.a_sigma_b + n as f64 / 2.0,
        scale: hp.b_sigma_b + residual_sq / 2.0,
    }
}

// ---------------------------------------------------------------------------
// reaction-time hierarchy: alpha, sigma_delta^2, a_tau, b_tau
// ---------------------------------------------------------------------------

/// Conditional of the corpus-level log reaction mean alpha given the
/// `n_tweets` tweet means alpha_x (their sum suffices): normal shrinkage of
/// the tweet average toward the hyperprior mean, with pull ratio
/// sigma_delta^2 / sigma_alpha^2.
pub fn alpha_conditional(
    n_tweets: u64,
    sum_alpha_x: f64,
    sigma_delta: f64,
    hp: &Hyperpriors,
) -> NormalParams {
    let w = sigma_delta * sigma_delta / (hp.sigma_alpha * hp.sigma_alpha);
    let denom = n_tweets as f64 + w;
    NormalParams {
        mean: (sum_alpha_x + w * hp.mu_alpha) / denom,
        sd: (sigma_delta * sigma_delta / denom).sqrt(),
    }
}

/// Conditional of sigma_delta^2 given the squared deviations of the tweet
/// means around alpha (`sq_dev` = sum of (alpha_x - alpha)^2).
pub fn sigma_delta2_conditional(n_tweets: u64, sq_dev: f64, hp: &Hyperpriors) -> InvGammaParams {
    InvGammaParams {
        shape: hp.a_delta + n_tweets as f64 / 2.0,
        scale: hp.b_delta + sq_dev / 2.0,
    }
}

/// Unnormalized log conditional of the reaction-variance shape a_tau, up to
/// terms constant in the shape: the log-normal prior density of a_tau plus
/// the a-dependent part of the inverse-gamma likelihood of the tweet
/// variances, n (a ln b_tau - ln Gamma(a)) - a * sum(ln tau_x^2).
pub fn a_tau_log_target(
    a: f64,
    n_tweets: u64,
    sum_ln_var: f64,
    b_tau: f64,
    hp: &Hyperpriors,
) -> f64 {
    if a.is_nan() || a <= 0.0 {
        return f64::NEG_INFINITY;
    }
    stats::lognormal_variable_logpdf(a, hp.mu_a, hp.sigma_a)
        + n_tweets as f64 * (a * b_tau.ln() - ln_gamma(a))
        - a * sum_ln_var
}

/// Random-walk Metropolis step for a_tau with normal increments of sd
/// `step`. Proposals at or below zero are rejected outright.
pub fn mh_a_tau<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    n_tweets: u64,
    sum_ln_var: f64,
    b_tau: f64,
    hp: &Hyperpriors,
    step: f64,
) -> (f64, bool) {
    let proposal = current + step * rng.sample::<f64, _>(StandardNormal);
    let ln_u = draw_uniform_ln(rng);
    if proposal.is_nan() || proposal <= 0.0 {
        return (current, false);
    }
    let ln_ratio = a_tau_log_target(proposal, n_tweets, sum_ln_var, b_tau, hp)
        - a_tau_log_target(current, n_tweets, sum_ln_var, b_tau, hp);
    if ln_u < ln_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Conditional of the reaction-variance scale b_tau given a_tau and the
/// tweet variances: the gamma prior is conjugate to the inverse-gamma
/// likelihood, giving shape k_b + n a_tau and scale
/// 1 / (1/theta_b + sum(1/tau_x^2)).
pub fn b_tau_conditional(
    n_tweets: u64,
    a_tau: f64,
    sum_inv_var: f64,
    hp: &Hyperpriors,
) -> GammaParams {
    GammaParams {
        shape: hp.k_b + n_tweets as f64 * a_tau,
        scale: 1.0 / (1.0 / hp.theta_b + sum_inv_var),
    }
}

/// Exact gamma draw, shape/scale convention.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, p: GammaParams) -> Result<f64> {
    rand_distr::Gamma::new(p.shape, p.scale)
        .map_err(|e| Error::Sampler(format!("gamma({}, {}): {e}", p.shape, p.scale)))
        .map(|d| d.sample(rng))
}

/// Exact inverse-gamma draw, shape/scale convention.
pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, p: InvGammaParams) -> f64 {
    stats::sample_inv_gamma(rng, p.shape, p.scale)
}

/// Exact normal draw.
pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, p: NormalParams) -> f64 {
    p.mean + p.sd * rng.sample::<f64, _>(StandardNormal)
}

// ---------------------------------------------------------------------------
// the homogeneous-Poisson baseline's branching rate
// ---------------------------------------------------------------------------

/// Conditional of the single Poisson branching rate given every vertex's
/// child count (`sum_m` over `n_vertices` vertices): gamma-Poisson
/// conjugacy.
pub fn lambda_conditional(n_vertices: u64, sum_m: u64, hp: &Hyperpriors) -> GammaParams {
    GammaParams {
        shape: hp.k_lambda + sum_m as f64,
        scale: 1.0 / (1.0 / hp.theta_lambda + n_vertices as f64),
    }
}

// ---------------------------------------------------------------------------
// per-tweet reaction parameters
// ---------------------------------------------------------------------------

/// Conditional of alpha_x for a fully observed tweet with `n_reactions` log
/// reaction times summing to `sum_log_s`: normal with the tweet variance
/// tau_x^2 and the corpus prior N(alpha, sigma_delta^2) pooled by
/// precision. With no reactions this is exactly the prior.
pub fn alpha_x_training_conditional(
    n_reactions: u64,
    sum_log_s: f64,
    tau_x: f64,
    alpha: f64,
    sigma_delta: f64,
) -> NormalParams {
    let v = tau_x * tau_x;
    let w = v / (sigma_delta * sigma_delta);
    let denom = n_reactions as f64 + w;
    NormalParams {
        mean: (sum_log_s + w * alpha) / denom,
        sd: (v / denom).sqrt(),
    }
}

/// Conditional of tau_x^2 for a fully observed tweet given alpha_x:
/// inverse-gamma with the corpus prior bumped by half the reaction count
/// and half the squared deviations of log reactions around alpha_x.
pub fn tau_x2_training_conditional(
    n_reactions: u64,
    sq_dev: f64,
    a_tau: f64,
    b_tau: f64,
) -> InvGammaParams {
    InvGammaParams {
        shape: a_tau + n_reactions as f64 / 2.0,
        scale: b_tau + sq_dev / 2.0,
    }
}

/// Unnormalized log conditional of alpha_x for a partially observed tweet:
/// the corpus prior, the observed log reactions `ln_reactions`, and one
/// right-censoring term per vertex still owing children — `pending` holds
/// (log elapsed time since the vertex joined, number of children yet to
/// come) pairs.
pub fn alpha_x_pred_log_target(
    alpha_x: f64,
    tau_x: f64,
    alpha: f64,
    sigma_delta: f64,
    ln_reactions: &[f64],
    pending: &[(f64, f64)],
) -> f64 {
    let mut lp = stats::normal_logpdf(alpha_x, alpha, sigma_delta);
    for &u in ln_reactions {
        lp += stats::normal_logpdf(u, alpha_x, tau_x);
    }
    for &(ln_elapsed, excess) in pending {
        lp += excess * stats::normal_log_sf(ln_elapsed, alpha_x, tau_x);
    }
    lp
}

/// Random-walk Metropolis step for a partially observed tweet's alpha_x.
#[allow(clippy::too_many_arguments)]
pub fn mh_alpha_x_pred<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    tau_x: f64,
    alpha: f64,
    sigma_delta: f64,
    ln_reactions: &[f64],
    pending: &[(f64, f64)],
    step: f64,
) -> (f64, bool) {
    let proposal = current + step * rng.sample::<f64, _>(StandardNormal);
    let ln_u = draw_uniform_ln(rng);
    let ln_ratio = alpha_x_pred_log_target(proposal, tau_x, alpha, sigma_delta, ln_reactions, pending)
        - alpha_x_pred_log_target(current, tau_x, alpha, sigma_delta, ln_reactions, pending);
    if ln_u < ln_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Independence Metropolis step for a partially observed tweet's tau_x.
/// The proposal is the inverse-gamma conditional a fully observed tweet
/// would have from the observed reactions alone, so the Hastings ratio
/// reduces to the censoring terms and the step is exact whenever nothing
/// is pending. Returns the new standard deviation.
pub fn mh_tau_x2_pred<R: Rng + ?Sized>(
    rng: &mut R,
    current_tau: f64,
    alpha_x: f64,
    a_tau: f64,
    b_tau: f64,
    ln_reactions: &[f64],
    pending: &[(f64, f64)],
) -> (f64, bool) {
    let sq_dev = ln_reactions.iter().map(|u| (u - alpha_x).powi(2)).sum::<f64>();
    let proposal_params =
        tau_x2_training_conditional(ln_reactions.len() as u64, sq_dev, a_tau, b_tau);
    let proposal = sample_inv_gamma(rng, proposal_params).sqrt();
    let ln_u = draw_uniform_ln(rng);
    let mut ln_ratio = 0.0;
    for &(ln_elapsed, excess) in pending {
        ln_ratio += excess
            * (stats::normal_log_sf(ln_elapsed, alpha_x, proposal)
                - stats::normal_log_sf(ln_elapsed, alpha_x, current_tau));
    }
    if ln_u < ln_ratio {
        (proposal, true)
    } else {
        (current_tau, false)
    }
}

// ---------------------------------------------------------------------------
// per-vertex retweet probability and final child count
// ---------------------------------------------------------------------------

/// Independence Metropolis step for one vertex's logit retweet probability.
/// The proposal is the vertex's normal prior N(mu_j, sigma_b^2), so the
/// acceptance ratio is the binomial likelihood ratio of its child count
/// `m` out of `followers` trials.
pub fn mh_logit_b<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    m: u64,
    followers: u64,
    mu_j: f64,
    sigma_b: f64,
) -> (f64, bool) {
    let proposal = mu_j + sigma_b * rng.sample::<f64, _>(StandardNormal);
    let ln_u = draw_uniform_ln(rng);
    let ln_ratio = stats::binomial_logpmf_logit(m, followers, proposal)
        - stats::binomial_logpmf_logit(m, followers, current);
    if ln_u < ln_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Shared Metropolis acceptance for a final-count proposal `proposal`
/// against `current`, both at least `m_obs`: the proposal distribution is
/// the count's own prior, so the ratio is the censored-observation factor
///
///   C(M*, m_obs) q^(M* - m_obs)  /  C(M, m_obs) q^(M - m_obs)
///
/// with `ln_q` the log survival probability of one child arriving after
/// the observation horizon.
fn m_accept_ln_ratio(proposal: u64, current: u64, m_obs: u64, ln_q: f64) -> f64 {
    if proposal == current {
        return 0.0;
    }
    stats::ln_choose(proposal, m_obs) - stats::ln_choose(current, m_obs)
        + (proposal as f64 - current as f64) * ln_q
}

/// Metropolis step for one vertex's final child count under the binomial
/// branching model: propose M* ~ Binomial(followers, b) and accept on the
/// censoring ratio. Proposals below the observed count are rejected.
pub fn mh_m_binomial<R: Rng + ?Sized>(
    rng: &mut R,
    current: u64,
    m_obs: u64,
    followers: u64,
    b: f64,
    ln_q: f64,
) -> (u64, bool) {
    let proposal = rand_distr::Binomial::new(followers, b)
        .expect("retweet probability is always in [0, 1]")
        .sample(rng);
    let ln_u = draw_uniform_ln(rng);
    if proposal < m_obs {
        return (current, false);
    }
    if ln_u < m_accept_ln_ratio(proposal, current, m_obs, ln_q) {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Same step under the homogeneous-Poisson baseline: propose
/// M* ~ Poisson(lambda).
pub fn mh_m_poisson<R: Rng + ?Sized>(
    rng: &mut R,
    current: u64,
    m_obs: u64,
    lambda: f64,
    ln_q: f64,
) -> Result<(u64, bool)> {
    let proposal: f64 = rand_distr::Poisson::new(lambda)
        .map_err(|e| Error::Sampler(format!("poisson({lambda}): {e}")))?
        .sample(rng);
    let proposal = proposal as u64;
    let ln_u = draw_uniform_ln(rng);
    if proposal < m_obs {
        return Ok((current, false));
    }
    if ln_u < m_accept_ln_ratio(proposal, current, m_obs, ln_q) {
        Ok((proposal, true))
    } else {
        Ok((current, false))
    }
}
