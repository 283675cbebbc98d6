//! Deterministic seed derivation.
//!
//! All randomness flows from a single master seed through SplitMix64 mixing,
//! so that the matrix, coefficient and noise streams of one instance are
//! independent and trial seeds are pairwise distinct.

/// SplitMix64 finalizer.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a tag.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_mul(0xA24B_AED4_963E_E407)))
}

/// Stream tags for the three independent streams of one problem instance.
pub const STREAM_MATRIX: u64 = 1;
pub const STREAM_COEFF: u64 = 2;
pub const STREAM_NOISE: u64 = 3;

/// Seed for trial (`sweep_index`, `repeat_index`) of an experiment.
pub fn trial_seed(master: u64, sweep_index: usize, repeat_index: usize) -> u64 {
    mix(mix(master, 0x1000 + sweep_index as u64), 0x2000 + repeat_index as u64)
}
