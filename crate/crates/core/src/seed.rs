//! Deterministic seed derivation.
//!
//! Every randomized component draws from a ChaCha stream derived from a
//! master seed and a path of integer tags. Work items seed themselves from
//! their own index, so parallel execution cannot change results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 scrambling step.
#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a tag path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut s = splitmix(master);
    for &tag in path {
        s = splitmix(s ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    s
}

/// Deterministic RNG for the given seed path.
pub fn rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_path_sensitive() {
        assert_eq!(derive(7, &[1, 2]), derive(7, &[1, 2]));
        assert_ne!(derive(7, &[1, 2]), derive(7, &[2, 1]));
        assert_ne!(derive(7, &[]), derive(8, &[]));
        // nesting differs from flat concatenation of the same tags
        assert_ne!(derive(derive(7, &[1]), &[2]), derive(7, &[1, 2]));
    }

    #[test]
    fn rngs_with_same_path_agree() {
        use rand::Rng;
        let mut a = rng(42, &[3]);
        let mut b = rng(42, &[3]);
        let xa: [u64; 4] = core::array::from_fn(|_| a.random());
        let xb: [u64; 4] = core::array::from_fn(|_| b.random());
        assert_eq!(xa, xb);
    }
}
