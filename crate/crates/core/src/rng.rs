//! Seeded random streams.
//!
//! Every replication owns independent ChaCha streams keyed by
//! `(base_seed, replication, stream)`. The environment, the attacker's coin
//! flips and the experiment setup (mean sampling, protected-set choice) never
//! share a stream, so attaching or swapping an attacker leaves the click
//! draws of the environment untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Label of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    /// Pre-attack click draws.
    Environment,
    /// Coin flips of randomized attacks.
    Attacker,
    /// Instance sampling and protected-set selection.
    Setup,
    /// Free-form stream for tests and tools.
    Custom(u64),
}

impl StreamId {
    fn index(self) -> u64 {
        match self {
            StreamId::Environment => 1,
            StreamId::Attacker => 2,
            StreamId::Setup => 3,
            StreamId::Custom(k) => 1 << 32 | k,
        }
    }
}

/// A deterministic stream of uniform deviates.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Uniform deviate in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Bernoulli draw; `p` outside `[0, 1]` saturates.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Samples `k` distinct elements of `pool` without replacement, in draw order.
    pub fn choose_distinct(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        let mut pool = pool.to_vec();
        let k = k.min(pool.len());
        for i in 0..k {
            let j = i + self.below(pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

impl rand::RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` derived from the experiment's base seed.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

/// Opens the stream `stream` under `seed`.
pub fn rng_stream(seed: u64, stream: StreamId) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(stream.index());
    RngStream { inner }
}
