//! Shared fixtures for the performance benchmarks: deterministic synthetic
//! corpora and short sampler configurations sized so a benchmark iteration
//! finishes in tens of milliseconds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cascadecast::data::{Dataset, RetweetGraph, Role};
use cascadecast::mcmc::{ModelKind, SamplerConfig};
use cascadecast::model::{
    default_follower_sampler, simulate_cascade, GlobalParams, DEFAULT_MAX_NODES,
};

/// Simulate `n` cascades from the default parameters, conditioned on a
/// realized reaction-time log-sd below 4 so the corpus stays in the regime
/// observed data occupies (the unconditioned tau_x^2 prior occasionally
/// yields reaction times spanning e^{±40} seconds).
pub fn synthetic_graphs(seed: u64, n: usize) -> Vec<RetweetGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let globals = GlobalParams::default();
    let mut graphs = Vec::with_capacity(n);
    let mut i = 0usize;
    while graphs.len() < n {
        let sim = simulate_cascade(
            format!("b{i:04}"),
            &globals,
            DEFAULT_MAX_NODES,
            &mut default_follower_sampler,
            &mut rng,
        )
        .expect("simulation from reference parameters");
        i += 1;
        if sim.tau_x <= 4.0 && sim.graph.total_retweets() >= 1 {
            graphs.push(sim.graph);
        }
    }
    graphs
}

/// A training-only corpus of `n` cascades.
pub fn training_corpus(seed: u64, n: usize) -> Dataset {
    let mut ds = Dataset::from_graphs(synthetic_graphs(seed, n));
    ds.derive_all().expect("simulated cascades are valid");
    ds
}

/// A corpus with the second half held out and observed to the given
/// fraction, exercising the prediction-side updates.
pub fn forecast_corpus(seed: u64, n: usize, fraction: f64) -> Dataset {
    let mut ds = Dataset::from_graphs(synthetic_graphs(seed, n));
    for i in n / 2..n {
        ds.roles[i] = Role::Prediction;
    }
    ds.derive_all().expect("simulated cascades are valid");
    ds.attach_observations(fraction)
        .expect("fraction is in (0, 1]");
    ds
}

/// A single-chain configuration short enough to time repeatedly.
pub fn short_config(model: ModelKind) -> SamplerConfig {
    SamplerConfig {
        n_iterations: 100,
        burn_in: 20,
        n_chains: 1,
        seed: 7,
        model,
        ..SamplerConfig::default()
    }
}
