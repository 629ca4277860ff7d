//! Seed derivation for independent random streams.
//!
//! A master seed is split into per-trial seeds, and a trial seed is split
//! into per-component streams (context sampler, reward noise, agent,
//! attacker). The scheme is SplitMix64 applied to `base ^ golden * index`
//! style mixing, which is stable across platforms and rand versions, so
//! recorded seeds reproduce exactly.

/// One step of the SplitMix64 output function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a substream seed from `base` and a stream index.
pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix64(base.wrapping_add(splitmix64(stream)))
}

/// Seed for trial number `k` (0-based) under a master seed.
pub fn trial_seed(master: u64, k: u64) -> u64 {
    derive(master, 0x7472_6961_6c00_0000 | k) // "trial" tag
}

/// Component streams within one trial.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Context = 1,
    Noise = 2,
    Agent = 3,
    Attacker = 4,
    Validation = 5,
    ArmDraw = 6,
}

/// Seed for one component stream of a trial.
pub fn stream_seed(trial: u64, stream: Stream) -> u64 {
    derive(trial, stream as u64)
}
