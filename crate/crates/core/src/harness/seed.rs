//! Stable per-trial seed derivation.
//!
//! Seeds are a SplitMix64 chain: starting from `splitmix64(master)`, each
//! part `p` is folded in as `h = splitmix64(h ^ p)`. String labels enter as
//! their 64-bit FNV-1a hash. The signal of trial `t` at point `(n, m)` uses
//! parts `(fnv1a("signal"), n, m, t)`; a strategy's measurement noise and row
//! draws use `(fnv1a(label), n, m, t)`.

/// Human-readable statement of the scheme, recorded in run manifests.
pub const SEED_SCHEME: &str = "splitmix64 chain: h = splitmix64(master); h = splitmix64(h ^ part) \
for each part; signal parts (fnv1a64(\"signal\"), n, m, trial); strategy parts (fnv1a64(label), n, m, trial)";

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a64(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |h, &p| splitmix64(h ^ p))
}

pub fn signal_seed(master: u64, n: usize, m: usize, trial: usize) -> u64 {
    derive_seed(master, &[fnv1a64("signal"), n as u64, m as u64, trial as u64])
}

pub fn strategy_seed(master: u64, label: &str, n: usize, m: usize, trial: usize) -> u64 {
    derive_seed(master, &[fnv1a64(label), n as u64, m as u64, trial as u64])
}
