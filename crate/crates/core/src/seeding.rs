//! Deterministic seed derivation.
//!
//! Every randomized task (one trajectory optimization, one training epoch,
//! one evaluation sweep) draws from its own generator whose seed is derived
//! from the master seed and the task coordinates, so results do not depend on
//! scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds task coordinates into a master seed. Order matters:
/// `derive_seed(s, &[1, 2]) != derive_seed(s, &[2, 1])` in general.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

pub fn task_rng(master: u64, parts: &[u64]) -> TaskRng {
    TaskRng::seed_from_u64(derive_seed(master, parts))
}

// Stream tags keep the different stages from sharing generators.
pub(crate) const STREAM_DATASET: u64 = 1;
pub(crate) const STREAM_TRAIN: u64 = 2;
pub(crate) const STREAM_EVAL: u64 = 3;
pub(crate) const STREAM_INIT: u64 = 4;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_order_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[0]), derive_seed(8, &[0]));
        let a: f64 = task_rng(3, &[4]).random();
        let b: f64 = task_rng(3, &[4]).random();
        assert_eq!(a, b);
    }
}
