//! Per-trial seed derivation.

/// One step of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`; independent of scheduling order.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Seed of a named auxiliary stream (jitter, probes) of a trial.
pub fn stream_seed(trial: u64, stream: u64) -> u64 {
    splitmix64(trial ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}
