//! Seed derivation. Every random stream in the crate comes from one
//! experiment seed XOR-ed with the FNV-1a hash of a purpose tag, fed to
//! ChaCha8 (a counter-based generator with a platform-independent stream).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn purpose_tag(purpose: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    purpose
        .bytes()
        .fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    seed ^ purpose_tag(purpose)
}

pub fn stream(seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}
