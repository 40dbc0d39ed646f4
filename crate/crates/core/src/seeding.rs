use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags; each purpose gets its own ChaCha stream under one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Environment = 1,
    Planner = 2,
    Uniform = 3,
    Evaluation = 4,
    Check = 5,
}

/// Independent generator for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
