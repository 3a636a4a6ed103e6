//! Deterministic random streams.
//!
//! A stream is identified by `(base_seed, stream_index)`. The generator is
//! ChaCha8 keyed by the base seed with the stream index selecting the
//! ChaCha stream, so distinct indices give independent sequences and equal
//! pairs reproduce bit-identical output.

use crate::error::{invalid, Result};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    base_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(base_seed);
        inner.set_stream(stream_index);
        Self {
            base_seed,
            stream_index,
            inner,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random bits centred in their cell: never 0, never 1
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential draw with rate 1.
    pub fn exp1(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Exponential draw with the given rate.
    pub fn exp(&mut self, rate: f64) -> f64 {
        self.exp1() / rate
    }

    /// Bernoulli draw with success probability `prob`.
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.uniform() < prob
    }
}

/// Draw from the exponential law truncated to `(0, t)`, density
/// `e^{-τ} / (1 - e^{-t})`, by inverting its CDF.
pub fn sample_truncated_exponential(t: f64, rng: &mut RngStream) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return invalid(format!("truncation time must be > 0, got {t}"));
    }
    let u = rng.uniform();
    // τ = -ln(1 - u(1 - e^{-t}))
    let tau = -(-u * -(-t).exp_m1()).ln_1p();
    Ok(tau.min(t))
}

impl RngCore for RngStream {
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
