//! Deterministic per-unit random streams.
//!
//! Every update unit — the serial global block, each tweet's block, each
//! vertex's block — draws from its own ChaCha stream whose key packs
//! (master seed, chain, iteration, phase, tweet, vertex). A unit's draws
//! therefore depend only on its coordinates, never on scheduling, so runs
//! with one worker thread and with many are bit-identical.

use rand_chacha::ChaCha8Rng;

/// Update phases; phase `Init` is reserved for drawing starting states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init = 0,
    Globals = 1,
    Tweets = 2,
    Vertices = 3,
}

/// Coordinates identifying one update unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub chain: u64,
    pub iteration: u64,
    pub phase: Phase,
    pub tweet: u64,
    pub vertex: u64,
}

/// Build the unit's stream. The packing is injective for chains below 2^56
/// and tweet/vertex indices below 2^32, far beyond any realistic run.
pub fn stream_rng(master_seed: u64, key: StreamKey) -> ChaCha8Rng {
    use rand::SeedableRng;
    debug_assert!(key.tweet < (1 << 32) && key.vertex < (1 << 32));
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&((key.chain << 8) | key.phase as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&key.iteration.to_le_bytes());
    seed[24..32].copy_from_slice(&((key.tweet << 32) | key.vertex).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}
