//! Deterministic seed derivation.
//!
//! Every source of randomness in the toolkit is keyed off one master seed.
//! Per-trial seeds are derived by hashing (master, stream, index) so that
//! trials can run on any number of workers in any order and still see the
//! same random draws.

/// SplitMix64 finalizer; a bijective mixer with good avalanche behavior.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for (`stream`, `index`) under `master`.
///
/// `stream` distinguishes experiment axes (e.g. the subset size t),
/// `index` the trial within the stream.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(master) ^ stream) ^ index)
}
