//! Derivation of independent task seeds from the run seed.

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the task identified by `parts` under `base`. Order matters;
/// different tags keep streams of different stages apart.
pub fn derive(base: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = mix64(base ^ 0x9e37_79b9_7f4a_7c15);
    for b in tag.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    for &p in parts {
        h = mix64(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ p);
    }
    h
}
