//! Content hashing for ids and keyed RNG streams.

use alloc::string::String;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Feeds length-prefixed parts into a SHA-256 so `["ab","c"]` and `["a","bc"]` differ.
pub fn digest_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// First 16 hex characters of the digest.
pub fn short_hex<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    hex::encode(&digest_parts(parts)[..8])
}

/// Id of a test case: hash of its texts and expected label.
pub fn case_id(texts: &[String], expected_label: u32) -> String {
    let label = expected_label.to_le_bytes();
    let count = (texts.len() as u64).to_le_bytes();
    short_hex(
        core::iter::once(b"case".as_slice())
            .chain(core::iter::once(count.as_slice()))
            .chain(texts.iter().map(|t| t.as_bytes()))
            .chain(core::iter::once(label.as_slice())),
    )
}

/// Deterministic RNG for one (seed, purpose...) stream.
///
/// Keying every stream by the run seed plus names such as a case id keeps
/// results independent of processing order and thread count.
pub fn stream_rng(seed: u64, keys: &[&str]) -> ChaCha8Rng {
    let seed_bytes = seed.to_le_bytes();
    let digest = digest_parts(
        core::iter::once(seed_bytes.as_slice()).chain(keys.iter().map(|k| k.as_bytes())),
    );
    ChaCha8Rng::from_seed(digest)
}

/// 64-bit hash of string parts, used by mocks and feature hashing.
pub fn hash64(parts: &[&[u8]]) -> u64 {
    let d = digest_parts(parts.iter().copied());
    u64::from_le_bytes([d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7]])
}
