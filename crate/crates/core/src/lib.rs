//! Forecasting the final size of retweet cascades from an early prefix.
//!
//! The crate implements a hierarchical Bayesian model of cascade growth —
//! log-normal reaction times with tweet-level parameters, binomial retweet
//! counts driven by follower count and depth through a logit link — together
//! with a Metropolis-within-Gibbs sampler, posterior-predictive size
//! forecasts, a set of benchmark comparison models, and the exploratory
//! statistics used to motivate the model.
//!
//! Typical flow:
//!
//! ```no_run
//! use cascadecast::prelude::*;
//!
//! # fn main() -> cascadecast::error::Result<()> {
//! let mut dataset = cascadecast::data::load_dataset("cascades.jsonl")?;
//! dataset.derive_all()?;
//! dataset.partition(7)?;
//! dataset.attach_observations(0.5)?;
//!
//! let config = SamplerConfig { seed: 7, ..SamplerConfig::default() };
//! let samples = run_chains(&dataset, &config, &Hyperpriors::default())?;
//! for idx in dataset.indices(Role::Prediction) {
//!     let obs = dataset.observations[idx].as_ref().unwrap();
//!     let summary = predictive_total(&samples, obs, 0.90)?;
//!     println!("{}: median {} [{}, {}]", obs.tweet_id, summary.median, summary.lo, summary.hi);
//! }
//! # Ok(())
//! # }
//! ```

pub mod analysis;
pub mod benchmarks;
pub mod data;
pub mod error;
pub mod mcmc;
pub mod model;
pub mod predict;
pub mod report;
pub mod stats;

pub mod prelude {
    //! The types and entry points most programs need.
    pub use crate::data::{
        load_dataset, observation_prefix, Dataset, ObservedCascade, RetweetEvent, RetweetGraph,
        Role,
    };
    pub use crate::error::{Error, Result};
    pub use crate::mcmc::{run_chain, run_chains, ModelKind, PosteriorSamples, SamplerConfig};
    pub use crate::model::{
        simulate_cascade, GlobalParams, Hyperpriors, SimulatedCascade, TweetParams, UserParams,
    };
    pub use crate::predict::{credible_interval, predictive_total, PredictiveSummary};
}
