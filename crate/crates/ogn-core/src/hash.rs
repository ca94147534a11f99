//! Deterministic, fast hashing for octree keys.
//!
//! The default `HashMap` hasher is randomly seeded per process, which is both
//! slower than necessary for small fixed-width keys and an obstacle to
//! reproducible memory layouts. Key lookups dominate the sparse convolution
//! path, so the hot maps use this fixed multiply-xor hasher instead.
//! Iteration order is still unspecified; anything order-sensitive sorts keys
//! explicitly.

use std::collections::{HashMap, HashSet};
use std::hash::{BuildHasherDefault, Hasher};

/// Multiply-xor finalizer over the written words (splitmix64-style).
#[derive(Default, Clone)]
pub struct FixedStateHasher {
    state: u64,
}

impl Hasher for FixedStateHasher {
    #[inline]
    fn finish(&self) -> u64 {
        self.state
    }

    #[inline]
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.mix(b as u64);
        }
    }

    #[inline]
    fn write_u8(&mut self, v: u8) {
        self.mix(v as u64);
    }

    #[inline]
    fn write_u64(&mut self, v: u64) {
        self.mix(v);
    }

    #[inline]
    fn write_usize(&mut self, v: usize) {
        self.mix(v as u64);
    }
}

impl FixedStateHasher {
    #[inline]
    fn mix(&mut self, v: u64) {
        let mut z = self.state.wrapping_add(v).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        self.state = z ^ (z >> 31);
    }
}

pub type FixedBuildHasher = BuildHasherDefault<FixedStateHasher>;
pub type KeyMap<K, V> = HashMap<K, V, FixedBuildHasher>;
pub type KeySet<K> = HashSet<K, FixedBuildHasher>;

/// FNV-1a over a byte string; used for config fingerprints in checkpoints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hasher_is_deterministic_across_instances() {
        let build = FixedBuildHasher::default();
        let mut m: KeyMap<u64, u32> = HashMap::with_hasher(build);
        m.insert(42, 1);
        assert_eq!(m.get(&42), Some(&1));

        let mut a = FixedStateHasher::default();
        let mut b = FixedStateHasher::default();
        a.write_u64(0xdead_beef);
        b.write_u64(0xdead_beef);
        assert_eq!(a.finish(), b.finish());
        assert_ne!(a.finish(), 0);
    }

    #[test]
    fn fnv_matches_reference_vector() {
        // Known FNV-1a test vector: empty input -> offset basis.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
