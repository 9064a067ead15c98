//! Counter-addressable random streams.
//!
//! Every draw is keyed by `(seed, stream, index)`: a ChaCha8 keystream is
//! selected by `seed` and `stream` and each index owns a fixed window of
//! four 32-bit words. Seeking to an index therefore reproduces exactly the
//! value a sequential pass would have produced, which makes coupled copies
//! and per-replication streams independent of evaluation order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_DRAW: u128 = 4;

/// Stream offsets used to separate independent roles within a replication.
pub mod role {
    pub const PRIMARY: u64 = 0;
    pub const COUPLED: u64 = 1;
    pub const SECOND: u64 = 2;
    pub const AUX: u64 = 3;
}

/// Stream id for replication `r` in a given role.
pub fn replication_stream(r: u64, role: u64) -> u64 {
    r.wrapping_mul(4).wrapping_add(role)
}

#[derive(Clone)]
pub struct CounterRng {
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Positions the stream at the draw owned by `index`.
    pub fn seek(&mut self, index: i64) {
        let offset = (index as u64) ^ (1u64 << 63);
        self.inner.set_word_pos(offset as u128 * WORDS_PER_DRAW);
    }

    /// The two 64-bit words of the next draw.
    #[inline]
    pub fn next_draw(&mut self) -> (u64, u64) {
        (self.inner.next_u64(), self.inner.next_u64())
    }

    /// Uniform on (0, 1) from one draw.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let (u, _) = self.next_draw();
        unit_open(u)
    }

    /// Standard normal from one draw (Box-Muller, cosine branch).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        let (a, b) = self.next_draw();
        box_muller(a, b)
    }
}

/// Maps the 52 high bits of `u` onto the open interval (0, 1).
#[inline]
pub fn unit_open(u: u64) -> f64 {
    ((u >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline]
pub fn box_muller(a: u64, b: u64) -> f64 {
    let u1 = unit_open(a);
    let u2 = unit_open(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
