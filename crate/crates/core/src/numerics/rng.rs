//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream_id, counter)` and backed by a
//! ChaCha keystream, so a draw depends only on its address and never on
//! which thread asked for it. Independent consumers obtain their own
//! stream with [`RngStream::derive`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::Points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    pub counter: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            stream_id: 0,
            counter: 0,
        }
    }

    /// Child stream for an independent consumer identified by `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(1))),
            counter: 0,
        }
    }

    /// Same stream, starting `words` 32-bit words further along.
    pub fn advanced(&self, words: u64) -> Self {
        RngStream {
            counter: self.counter.wrapping_add(words),
            ..*self
        }
    }

    /// A generator positioned at this stream's address.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(self.counter as u128);
        rng
    }
}

/// `n × d` matrix of independent standard normal draws.
pub fn draw_standard_normal(stream: &RngStream, n: usize, d: usize) -> Points {
    let mut rng = stream.rng();
    let data = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Points::from_vec(n, d, data)
}

/// `n` independent draws from `Uniform[0, 1)`.
pub fn draw_uniform(stream: &RngStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| rng.random::<f64>()).collect()
}
