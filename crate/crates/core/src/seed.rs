//! Deterministic sub-seed derivation.

/// SplitMix64 finalizer applied to `base + index * golden_gamma`. Used to
/// give every EM start, replication and simulated experiment its own
/// independent stream from one master seed.
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_streams() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| split_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(1, 0), split_seed(2, 0));
    }
}
