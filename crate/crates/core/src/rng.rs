//! Seeded, splittable random streams.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`). A stream
//! is identified by `(seed, stream)`: the 256-bit ChaCha key is expanded from
//! the 64-bit seed with `SeedableRng::seed_from_u64` (a PCG32 expansion), and
//! `stream` selects the ChaCha nonce. Both are value-stable and portable, so a
//! given `(seed, stream)` produces the same sequence on every platform.
//!
//! `split(id)` derives the child stream `stream * 0x100000001B3 + id + 1`
//! (wrapping). Children of distinct ids never share a nonce with each other
//! or with their parent.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STREAM_PRIME: u64 = 0x0000_0100_0000_01B3;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, id: u64) -> Self {
        let child = self
            .stream
            .wrapping_mul(STREAM_PRIME)
            .wrapping_add(id)
            .wrapping_add(1);
        Self::with_stream(self.seed, child)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}
