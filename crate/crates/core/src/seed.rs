//! Seed derivation.
//!
//! Every random stream in a run is keyed off the master seed through SHA-256,
//! so one client's dropout never shifts another client's randomness.

use sha2::{Digest, Sha256};

/// Purpose tags keep independent streams for the same (client, round).
pub mod purpose {
    pub const TRAIN: &str = "train";
    pub const NOISE: &str = "noise";
    pub const DATA: &str = "data";
    pub const SPLIT: &str = "split";
    pub const PARTITION: &str = "partition";
    pub const SECRET: &str = "secret";
}

/// `SHA-256(tag || master || client_id || round)` truncated to its first
/// eight bytes, read big-endian. Integers are encoded as 8-byte big-endian.
pub fn derive_seed(tag: &str, master: u64, client_id: u64, round: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(master.to_be_bytes());
    h.update(client_id.to_be_bytes());
    h.update(round.to_be_bytes());
    let digest = h.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// SplitMix64 finalizer, used to key per-epoch shuffles from a training seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
