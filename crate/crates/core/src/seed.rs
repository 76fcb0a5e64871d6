//! Seed derivation and stream splitting.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] built by
//! [`stream`]. A root seed is turned into child seeds with [`derive`], and a
//! child seed is split into independent noise sources by ChaCha stream id, so
//! results are reproducible across runs, platforms and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used when generating one trajectory.
pub mod streams {
    pub const INIT_MEAN: u64 = 0;
    pub const INIT_NOISE: u64 = 1;
    pub const PROCESS: u64 = 2;
    pub const MEASUREMENT: u64 = 3;
}

/// RNG for `seed`, positioned on ChaCha stream `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed of `root` for the named purpose (`"dataset"`, `"jlstm/init"`, ...).
pub fn derive(root: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_is_stable_and_label_sensitive() {
        assert_eq!(derive(7, "dataset"), derive(7, "dataset"));
        assert_ne!(derive(7, "dataset"), derive(7, "oor"));
        assert_ne!(derive(7, "dataset"), derive(8, "dataset"));
    }

    #[test]
    fn streams_are_independent() {
        let a: u64 = stream(3, 0).random();
        let b: u64 = stream(3, 1).random();
        let a2: u64 = stream(3, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
