//! Random-number contract shared by every stochastic operation.
//!
//! All draws come from ChaCha20 (`rand_chacha::ChaCha20Rng`). A master seed
//! selects the key; independent tasks (bootstrap replicates, optimizer
//! restarts, Monte-Carlo repetitions, sample chunks) use distinct stream
//! numbers of the same key. Results therefore do not depend on how tasks are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Version tag of the generator contract. Bump when the mapping from
/// (seed, stream) to bits changes.
pub const RNG_CONTRACT: &str = "chacha20-stream-v1";

/// Number of draws per chunk when large samples are generated in parallel.
pub const CHUNK: usize = 4096;

pub fn master(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for task `stream` under `seed`. Stream 0 equals [`master`].
pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for a named sub-computation, so that e.g. fold
/// assignment and replicate draws never share a stream.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
