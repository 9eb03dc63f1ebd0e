//! Content hashing for ids, cache keys and counter-based random draws.

use sha2::{Digest, Sha256};

/// SHA-256 over length-prefixed parts, so `["ab","c"]` and `["a","bc"]` differ.
pub fn digest_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let out = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&out);
    bytes
}

pub fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn hex_digest(parts: &[&[u8]]) -> String {
    hex(&digest_parts(parts))
}

pub fn u64_of(parts: &[&[u8]]) -> u64 {
    let d = digest_parts(parts);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Uniform draw in [0, 1) with 53 bits of resolution.
pub fn unit_draw(parts: &[&[u8]]) -> f64 {
    (u64_of(parts) >> 11) as f64 / (1u64 << 53) as f64
}
