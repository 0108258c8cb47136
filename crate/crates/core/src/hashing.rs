//! Content digests and named sub-seeds.

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Derive an independent seed for one randomized stage.
///
/// Every random stream in the pipeline (split, init, shuffle, dropout) is
/// keyed by the run seed plus a stage name and optional counters, so each
/// stage can be reproduced on its own.
pub fn derive_seed(seed: u64, stage: &str, counters: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((stage.len() as u64).to_le_bytes());
    hasher.update(stage.as_bytes());
    for c in counters {
        hasher.update(c.to_le_bytes());
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}
