//! Deterministic randomness: seeded substreams and the Poisson sampler that
//! drives online bagging.
//!
//! Every consumer of randomness gets its own `RngStream`, keyed by the run seed
//! plus a stream id. Ensemble member `i` draws its bagging weights from stream
//! `2i + 1` and its model randomness (e.g. per-leaf feature subsets) from stream
//! `2i + 2`; stream 0 belongs to the ensemble scaffold. Keeping weights on a
//! dedicated stream makes the per-member weight sequence identical across batch
//! sizes and executors, which seed-matched comparisons rely on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stream id for ensemble-scaffold randomness (member `i` uses `2i+1`, `2i+2`).
pub const SCAFFOLD_STREAM: u64 = 0;

pub fn weight_stream_id(member: usize) -> u64 {
    2 * member as u64 + 1
}

pub fn model_stream_id(member: usize) -> u64 {
    2 * member as u64 + 2
}

/// A deterministic substream of the run's random sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { rng }
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }

    /// Bernoulli draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// `k` distinct indices sampled without replacement from `0..n`, ascending.
    pub fn distinct_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} distinct indices from 0..{n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut picked = pool[..k].to_vec();
        picked.sort_unstable();
        picked
    }
}

/// Draws from Poisson(lambda) by Knuth's multiplication method.
///
/// Exact for the lambdas used here (1 and 6) and deterministic given the
/// stream; the expected number of uniform draws per sample is lambda + 1.
pub fn poisson(rng: &mut RngStream, lambda: f64) -> Result<u64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::domain(format!("poisson lambda must be finite and >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    Ok(poisson_raw(rng, (-lambda).exp()))
}

/// Hot-path variant taking a precomputed exp(-lambda).
pub(crate) fn poisson_raw(rng: &mut RngStream, exp_neg_lambda: f64) -> u64 {
    let mut k = 0u64;
    let mut p = 1.0f64;
    loop {
        p *= rng.next_f64();
        if p <= exp_neg_lambda {
            return k;
        }
        k += 1;
    }
}
