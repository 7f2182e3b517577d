//! Keyed random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream whose key is
//! built from the run seed, a purpose tag and up to two indices. Draws for
//! one (slot, user) pair therefore never depend on how many numbers other
//! parts of the simulation consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that separate otherwise identical keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Mobility = 2,
    Fading = 3,
    Dataset = 4,
    CmfInit = 5,
}

pub fn keyed_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
