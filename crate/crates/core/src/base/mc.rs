//! Monte Carlo ensembles with deterministic parallel reduction.
//!
//! An ensemble of `n` draws is cut into a fixed number of shards. Shard `k`
//! owns the stream `(seed, stream_base + k)` and its own accumulator; the
//! shard accumulators are merged in shard order. The result therefore does
//! not depend on thread count or scheduling.

use crate::base::rng::RngStream;
use rayon::prelude::*;
use serde::Serialize;

pub const SHARDS: u64 = 64;

/// Estimate with its standard error and sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl McEstimate {
    /// `|mean - target|` measured in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Streaming mean/variance (Welford), mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.n = n;
    }

    pub fn estimate(&self) -> McEstimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            std_error: (var / self.n.max(1) as f64).sqrt(),
            n: self.n,
        }
    }
}

fn shard_len(n: u64, k: u64) -> u64 {
    n / SHARDS + u64::from(k < n % SHARDS)
}

/// Run `n` draws of a vector statistic of length `dim`; each coordinate
/// gets its own estimate.
pub fn ensemble_vec<F>(n: u64, seed: u64, stream_base: u64, dim: usize, draw: F) -> Vec<McEstimate>
where
    F: Fn(&mut RngStream, &mut [f64]) + Sync,
{
    let shards: Vec<Vec<Accumulator>> = (0..SHARDS)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(seed, stream_base + k);
            let mut acc = vec![Accumulator::default(); dim];
            let mut buf = vec![0.0; dim];
            for _ in 0..shard_len(n, k) {
                draw(&mut rng, &mut buf);
                for (a, &x) in acc.iter_mut().zip(&buf) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Accumulator::default(); dim];
    for shard in &shards {
        for (t, a) in total.iter_mut().zip(shard) {
            t.merge(a);
        }
    }
    total.iter().map(Accumulator::estimate).collect()
}

/// Scalar ensemble.
pub fn ensemble<F>(n: u64, seed: u64, stream_base: u64, draw: F) -> McEstimate
where
    F: Fn(&mut RngStream) -> f64 + Sync,
{
    ensemble_vec(n, seed, stream_base, 1, |rng, out| out[0] = draw(rng))[0]
}

/// Collect `n` raw draws in a deterministic order (shard by shard).
pub fn collect_samples<T, F>(n: u64, seed: u64, stream_base: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    let shards: Vec<Vec<T>> = (0..SHARDS)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(seed, stream_base + k);
            (0..shard_len(n, k)).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    shards.into_iter().flatten().collect()
}

/// Fallible variant of [`collect_samples`]; the first error in shard order
/// is returned.
pub fn try_collect_samples<T, E, F>(n: u64, seed: u64, stream_base: u64, draw: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&mut RngStream) -> Result<T, E> + Sync,
{
    let shards: Vec<Result<Vec<T>, E>> = (0..SHARDS)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(seed, stream_base + k);
            (0..shard_len(n, k)).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n as usize);
    for s in shards {
        out.extend(s?);
    }
    Ok(out)
}

/// Mean and standard error of a slice of draws.
pub fn estimate_of(xs: &[f64]) -> McEstimate {
    let mut acc = Accumulator::default();
    for &x in xs {
        acc.push(x);
    }
    acc.estimate()
}
