//! Deterministic seed-stream derivation.
//!
//! Every source of randomness in a run (resets, process noise, planner
//! sampling, experiment cells) draws its seed from a master seed through
//! [`substream`], so adding or removing one consumer never perturbs the
//! streams of the others.

/// Derives a child seed from `(master, tag, index)` via FNV-1a.
///
/// The hash is fixed by this crate, not `std`, so streams are stable across
/// platforms and Rust versions.
pub fn substream(master: u64, tag: &str, index: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for byte in master
        .to_le_bytes()
        .iter()
        .chain(tag.as_bytes())
        .chain(index.to_le_bytes().iter())
    {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    // Final avalanche step; plain FNV leaves the high bits poorly mixed.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}
