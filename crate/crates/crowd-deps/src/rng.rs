//! Deterministic randomness plumbing.
//!
//! Every run derives all randomness from a single 64-bit seed. Replicates get
//! consecutive seeds via [`replicate_seed`]; within a replicate, independent
//! pipeline stages use separate ChaCha8 streams so extra draws in one stage
//! never perturb another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pipeline stages that need isolated random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Task generation and replay-pool shuffling.
    Generation,
    /// Allocation-loop response draws and tie-breaks.
    Allocation,
    /// Posterior sampling of debiased difficulty values.
    Sampling,
    /// Bootstrap resampling for confidence bands.
    Bootstrap,
}

impl Stage {
    fn stream(self) -> u64 {
        match self {
            Stage::Generation => 0,
            Stage::Allocation => 1,
            Stage::Sampling => 2,
            Stage::Bootstrap => 3,
        }
    }
}

/// Seed for replicate `index` of a run with base seed `base`.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// RNG for one stage of one replicate.
pub fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage.stream());
    rng
}
