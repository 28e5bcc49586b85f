//! Seed-derived random substreams.
//!
//! Every (agent, segment) pair draws from its own stream, so the forecast is
//! independent of thread count and agent processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Stream keyed by `hash(master_seed, agent_id, segment_index)`.
pub fn substream(master_seed: u64, agent_id: u64, segment_index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(agent_id.to_le_bytes());
    hasher.update(segment_index.to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
