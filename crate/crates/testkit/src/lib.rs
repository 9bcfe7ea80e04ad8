//! Generators and slow reference implementations shared by the test
//! suites. Nothing here calls the code it is used to check.

pub mod dag;
pub mod metrics;
pub mod ranking;
pub mod training;
pub mod trees;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
