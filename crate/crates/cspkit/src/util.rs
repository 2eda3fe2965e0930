//! Deterministic seed derivation for independent random streams.
//!
//! Every randomized stage hashes the root seed with a textual tag (and
//! optionally an index), so streams never overlap and results do not depend
//! on evaluation order or thread scheduling. The hash is FNV-1a over the
//! tag bytes and the little-endian root/index bytes — fixed for all time so
//! artifacts stay reproducible across versions and platforms.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(init: u64, bytes: &[u8]) -> u64 {
    let mut h = init;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derives an independent stream seed for a named stage.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let h = fnv1a(FNV_OFFSET, &root.to_le_bytes());
    fnv1a(h, tag.as_bytes())
}

/// Derives an independent stream seed for the `index`-th item of a named
/// stage.
pub fn derive_seed_indexed(root: u64, tag: &str, index: u64) -> u64 {
    fnv1a(derive_seed(root, tag), &index.to_le_bytes())
}
