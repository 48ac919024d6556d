//! Stable seed derivation for replica ensembles.
//!
//! A replica seed is obtained by folding the master seed, family name, size
//! and replica index through the SplitMix64 finalizer. The construction uses
//! only fixed arithmetic, so seeds are identical across versions, platforms
//! and scheduling.

use crate::problem::Family;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fold(acc: u64, word: u64) -> u64 {
    mix64(acc ^ mix64(word))
}

/// FNV-1a over the bytes of `s`.
fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn replica_seed(master: u64, family: Family, n: usize, replica: usize) -> u64 {
    let mut acc = mix64(master);
    acc = fold(acc, hash_str(family.as_str()));
    acc = fold(acc, n as u64);
    fold(acc, replica as u64)
}

/// Independent sub-stream seed for one stage of a replica (graph, couplings,
/// chain, ...).
pub fn stage_seed(replica: u64, stage: &str) -> u64 {
    fold(replica, hash_str(stage))
}
