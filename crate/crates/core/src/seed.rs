//! Deterministic randomness.
//!
//! Every random choice in this crate flows from an explicit [`Seed`]. Seeds
//! are passed down, never pulled from a global generator, so a run is
//! reproducible bit-for-bit regardless of thread count or call order. When a
//! component needs its own independent stream (one per sample, one per
//! position), it derives a child seed from stable string labels instead of
//! splitting a shared generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A 64-bit seed for a reproducible pseudo-random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// A generator for this seed. Identical seeds yield identical streams.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Derive a child seed from stable labels.
    ///
    /// The derivation hashes the parent value together with every label
    /// (length-prefixed, so `["ab", "c"]` and `["a", "bc"]` differ). Used to
    /// give each (sample, position) work item its own stream without any
    /// shared mutable state.
    pub fn derive(self, labels: &[&str]) -> Seed {
        let mut hasher = Sha256::new();
        hasher.update(self.0.to_le_bytes());
        for label in labels {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
        }
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        Seed(u64::from_le_bytes(bytes))
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_seeds_identical_streams() {
        let a: Vec<u64> = Seed(7).rng().random_iter().take(16).collect();
        let b: Vec<u64> = Seed(7).rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a: u64 = Seed(7).rng().random();
        let b: u64 = Seed(8).rng().random();
        assert_ne!(a, b);
    }

    #[test]
    fn derive_is_stable_and_label_sensitive() {
        let s = Seed(42);
        assert_eq!(s.derive(&["x", "y"]), s.derive(&["x", "y"]));
        assert_ne!(s.derive(&["x", "y"]), s.derive(&["xy"]));
        assert_ne!(s.derive(&["x"]), Seed(43).derive(&["x"]));
    }
}
