//! Seeded, splittable randomness.
//!
//! Every run owns a [`Seed`]. Each consumer (environment, posterior, test
//! matrices, tie-breaks, ...) draws from its own ChaCha stream so that changing
//! how one component consumes randomness never perturbs another. Arm outcomes
//! are counter-based: the outcome of arm `i` at round `t` is a pure function of
//! `(seed, t, i)`, so two algorithms sharing a seed see identical arm draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Named sub-streams of a run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Environment,
    Posterior,
    TestMatrix,
    TieBreak,
    Instance,
    Feedback,
    Diagnostics,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Environment => 1,
            Stream::Posterior => 2,
            Stream::TestMatrix => 3,
            Stream::TieBreak => 4,
            Stream::Instance => 5,
            Stream::Feedback => 6,
            Stream::Diagnostics => 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// An independent generator for one named stream of this seed.
    pub fn stream(self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream.id());
        rng
    }

    /// Child seed for replication or sweep point `index`.
    pub fn child(self, index: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random-access uniform draws keyed by `(round, arm)`.
#[derive(Clone, Debug)]
pub struct CounterStream {
    base: ChaCha8Rng,
    stride: u128,
}

impl CounterStream {
    pub fn new(seed: Seed, stream: Stream, arms: usize) -> Self {
        Self { base: seed.stream(stream), stride: arms as u128 }
    }

    /// Uniform draw in `[0, 1)` for the given round and arm.
    pub fn uniform(&self, round: u64, arm: usize) -> f64 {
        let mut rng = self.base.clone();
        // one u64 consumes two 32-bit words
        rng.set_word_pos((round as u128 * self.stride + arm as u128) * 2);
        let bits = rng.next_u64();
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Uniform choice of `count` distinct items from `pool`, order preserved.
pub(crate) fn choose_distinct<R: Rng + ?Sized>(rng: &mut R, pool: &[usize], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = rand::seq::index::sample(rng, pool.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}
