//! Stable seed derivation.
//!
//! Every randomized stage draws from a ChaCha stream keyed by a 64-bit seed. Sub-seeds
//! (per cascade, per trial) are derived with FNV-1a over the parent seed and a label and
//! then finalized with splitmix64, so they do not depend on iteration or thread order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and an arbitrary byte label.
pub fn derive(seed: u64, label: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(label) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    let mut buf = label.as_bytes().to_vec();
    buf.extend_from_slice(&index.to_le_bytes());
    derive(seed, &buf)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
