//! Deterministic derivation of independent random streams.
//!
//! Every stream is keyed by `(master seed, role, stage, player)`. The key is
//! folded through the SplitMix64 finalizer one component at a time, and the
//! result seeds a ChaCha8 generator. Streams therefore depend only on their
//! key, never on the order in which they are requested or on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    TrainingNoise,
    EvaluationNoise,
    Initialization,
    Shuffle,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::TrainingNoise => 1,
            StreamRole::EvaluationNoise => 2,
            StreamRole::Initialization => 3,
            StreamRole::Shuffle => 4,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `hash(seed, role, stage, player)`.
pub fn derive_seed(master: u64, role: StreamRole, stage: u64, player: u64) -> u64 {
    [role.tag(), stage, player]
        .iter()
        .fold(splitmix64(master), |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

pub fn stream(master: u64, role: StreamRole, stage: u64, player: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, role, stage, player))
}
