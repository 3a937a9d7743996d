//! Seeded randomness.
//!
//! Every random draw in the workspace comes from a ChaCha8 generator built by
//! [`stream`]: the 64-bit seed keys the generator and a 64-bit stream id
//! selects one of its independent output streams. Callers split work by
//! handing each unit (a row, a tree, a boosting stage) its own stream id, so
//! results do not depend on the order in which units are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids are namespaced by purpose in the upper 16 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Roll = 1,
    Outlier = 2,
    LabelNoise = 3,
    Tree = 4,
    Stage = 5,
    Split = 6,
    Fold = 7,
    PlcFault = 8,
    Shuffle = 9,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// Derives a child seed; used where a component takes a plain `u64` seed.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, index).next_u64()
}
