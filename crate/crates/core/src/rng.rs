//! Deterministic random streams.
//!
//! A single master seed expands into named child streams (task sampling,
//! rollout noise, buffer sampling, evaluation, initialization). Each stream
//! can be split further by index, so a rollout's noise depends only on
//! `(seed, stream name, iteration, task, rollout)` and never on execution
//! order or on how much randomness another component consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A position in the tree of derived random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_name(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Stream {
    /// Root stream for a master seed.
    pub fn root(seed: u64) -> Self {
        Stream {
            key: splitmix64(seed),
        }
    }

    /// Named child stream, e.g. `"tasks"` or `"rollout"`.
    pub fn named(&self, name: &str) -> Self {
        Stream {
            key: splitmix64(self.key ^ splitmix64(hash_name(name))),
        }
    }

    /// Indexed child stream.
    pub fn child(&self, index: u64) -> Self {
        Stream {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(index.wrapping_add(1))),
        }
    }

    /// Child stream addressed by a path of indices.
    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |s, &i| s.child(i))
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}
