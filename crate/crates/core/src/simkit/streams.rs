//! Counter-based random streams.
//!
//! Every stream is a ChaCha generator keyed directly by the tuple
//! `(master_seed, purpose, a, b)`. Distinct keys give independent streams, so
//! a replicate's draws never depend on which thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Run-level structure such as random level counts.
    Structure = 0,
    /// True and observed categories of one replicate.
    Design = 1,
    /// Response noise of one replicate at one error level.
    Noise = 2,
    /// Resampling of true categories given fixed observed ones.
    Conditional = 3,
}

pub fn stream(master_seed: u64, purpose: Purpose, a: u64, b: u64) -> SimRng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([master_seed, purpose as u64, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    SimRng::from_seed(key)
}
