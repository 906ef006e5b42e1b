//! Deterministic fan-out of one top-level seed into per-stage seeds.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named stage and index, stable across runs and platforms.
pub fn derive(seed: u64, stage: &str, index: u64) -> u64 {
    let mut h = mix64(seed);
    for b in stage.bytes() {
        h = mix64(h ^ b as u64);
    }
    mix64(h ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_streams() {
        assert_eq!(derive(1, "mix", 0), derive(1, "mix", 0));
        assert_ne!(derive(1, "mix", 0), derive(1, "mix", 1));
        assert_ne!(derive(1, "mix", 0), derive(1, "train", 0));
        assert_ne!(derive(1, "mix", 0), derive(2, "mix", 0));
    }
}
