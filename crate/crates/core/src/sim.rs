//! Monte Carlo configuration and the block-parallel replication engine.
//!
//! Replications are cut into fixed-size blocks. Block `i` of a computation always draws
//! from the stream `(master, purpose | sub | i)`, so results depend only on the
//! configuration and never on how many workers ran the blocks or in what order.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::normal::{GaussianStream, StreamSeed};

/// Replications per block. Part of the determinism contract; changing it changes every draw.
pub const BLOCK_SIZE: u64 = 8192;

pub const DEFAULT_SEED: u64 = 20_150_615;
pub const DEFAULT_POWER_REPS: u64 = 100_000;
pub const DEFAULT_CRITICAL_REPS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub reps: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(reps: u64, seed: u64) -> Self {
        Self { reps, seed }
    }

    pub fn power_default() -> Self {
        Self::new(DEFAULT_POWER_REPS, DEFAULT_SEED)
    }

    pub fn critical_default() -> Self {
        Self::new(DEFAULT_CRITICAL_REPS, DEFAULT_SEED)
    }

    pub fn with_reps(self, reps: u64) -> Self {
        Self { reps, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub(crate) fn require_reps(&self, min: u64) -> Result<()> {
        if self.reps < min {
            return Err(config!("at least {min} replications required, got {}", self.reps));
        }
        Ok(())
    }

    pub fn blocks(&self) -> u64 {
        self.reps.div_ceil(BLOCK_SIZE)
    }

    /// Stream feeding block `block` of the computation identified by `(purpose, sub)`.
    pub fn stream_seed(&self, purpose: Purpose, sub: u64, block: u64) -> StreamSeed {
        StreamSeed::new(self.seed, stream_id(purpose, sub, block))
    }
}

/// Top-level stream namespaces. Computations that must share draws (common random
/// numbers) use the same purpose and sub-index; everything else is kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Critical = 1,
    Power = 2,
    Risk = 3,
    RiskCurve = 4,
    BoundNull = 5,
    BoundAlt = 6,
    Welfare = 7,
    Coverage = 8,
}

fn stream_id(purpose: Purpose, sub: u64, block: u64) -> u64 {
    debug_assert!(sub < 1 << 32 && block < 1 << 24);
    ((purpose as u64) << 56) | ((sub & 0xFFFF_FFFF) << 24) | (block & 0xFF_FFFF)
}

/// Runs `f` once per block, in parallel when the `parallel` feature is on, and returns the
/// per-block results in block order. `f` receives the block's stream and its row count.
pub(crate) fn map_blocks<T, F>(cfg: &SimConfig, purpose: Purpose, sub: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut GaussianStream, usize) -> T + Sync + Send,
{
    let run = |block: u64| {
        let rows = (cfg.reps - block * BLOCK_SIZE).min(BLOCK_SIZE) as usize;
        let mut stream = cfg.stream_seed(purpose, sub, block).stream();
        f(&mut stream, rows)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.blocks()).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.blocks()).map(run).collect()
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers. Without the `parallel` feature
/// this just calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| config!("cannot start {threads} worker threads: {e}"))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

/// Binomial proportion estimate from per-block hit counts.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Proportion {
    pub estimate: f64,
    pub std_error: f64,
}

impl Proportion {
    pub fn from_counts(hits: u64, n: u64) -> Self {
        let estimate = hits as f64 / n as f64;
        let std_error = (estimate * (1.0 - estimate) / n as f64).sqrt();
        Self { estimate, std_error }
    }
}

/// Running sum and sum of squares, merged in block order.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Moments) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}
