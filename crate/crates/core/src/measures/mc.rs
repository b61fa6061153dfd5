//! Chunked, seed-derived Monte Carlo with batch-means error bars.
//!
//! The sample index space is cut into fixed chunks of [`CHUNK`] samples;
//! chunk `c` draws from its own generator seeded by `hash(seed, stream, c)`.
//! Samples are assigned to [`BATCHES`] contiguous batches by global index and
//! per-chunk partial sums are reduced in chunk order, so results do not
//! depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KlsError, Result};

pub const CHUNK: usize = 4096;
pub const BATCHES: usize = 32;
/// Smallest budget accepted by the estimators.
pub const MIN_SAMPLES: usize = 256;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of chunk `chunk` in namespace `stream`.
pub fn chunk_seed(seed: u64, stream: u64, chunk: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ chunk)
}

pub fn chunk_rng(seed: u64, stream: u64, chunk: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(chunk_seed(seed, stream, chunk))
}

/// Stable 64-bit name hash (FNV-1a) for deriving seed namespaces from labels.
pub fn stream_id(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sample budget, seed and seed namespace of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McPlan {
    pub samples: usize,
    pub seed: u64,
    pub stream: u64,
}

impl McPlan {
    pub fn new(samples: usize, seed: u64) -> Self {
        McPlan { samples, seed, stream: 0 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn chunks(&self) -> usize {
        self.samples.div_ceil(CHUNK)
    }

    fn batch_of(&self, index: usize) -> usize {
        ((index as u128 * BATCHES as u128) / self.samples as u128) as usize
    }
}

/// Estimate with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub estimate: f64,
    pub stderr: f64,
    pub batches: usize,
}

impl MomentReport {
    pub fn exact(v: f64) -> Self {
        MomentReport { estimate: v, stderr: 0.0, batches: 0 }
    }
}

/// Per-batch sums of `k` quantities.
#[derive(Debug, Clone)]
pub struct BatchSums {
    pub k: usize,
    pub sums: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl BatchSums {
    fn zeros(k: usize) -> Self {
        BatchSums { k, sums: vec![vec![0.0; k]; BATCHES], counts: vec![0; BATCHES] }
    }

    /// Overall means (weighting batches by their sizes).
    pub fn means(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        (0..self.k)
            .map(|j| self.sums.iter().map(|s| s[j]).sum::<f64>() / total as f64)
            .collect()
    }

    pub fn batch_means(&self, b: usize) -> Vec<f64> {
        self.sums[b].iter().map(|s| s / self.counts[b] as f64).collect()
    }

    /// Estimate of `phi(E q)` with the batch-means error of `phi` evaluated
    /// batch by batch.
    pub fn report<F: Fn(&[f64]) -> f64>(&self, phi: F) -> MomentReport {
        let estimate = phi(&self.means());
        let vals: Vec<f64> = (0..BATCHES).map(|b| phi(&self.batch_means(b))).collect();
        MomentReport { estimate, stderr: batch_stderr(&vals), batches: BATCHES }
    }
}

/// Standard error of the mean of batch values.
pub fn batch_stderr(vals: &[f64]) -> f64 {
    let b = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / b;
    let ss: f64 = vals.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (b * (b - 1.0))).sqrt()
}

/// Runs `body` once per chunk. `body(rng, count, emit)` must produce `count`
/// samples, calling `emit` with the `k` quantities of each.
pub fn batched_sums<F>(plan: &McPlan, k: usize, body: F) -> Result<BatchSums>
where
    F: Fn(&mut ChaCha8Rng, usize, &mut dyn FnMut(&[f64])) -> Result<()> + Sync,
{
    if plan.samples < MIN_SAMPLES {
        return Err(KlsError::InsufficientSamples { needed: MIN_SAMPLES, got: plan.samples });
    }
    let partials: Vec<Result<BatchSums>> = (0..plan.chunks())
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let count = CHUNK.min(plan.samples - start);
            let mut rng = chunk_rng(plan.seed, plan.stream, c as u64);
            let mut acc = BatchSums::zeros(k);
            let mut index = start;
            let mut emitted = 0usize;
            let mut bad = None;
            body(&mut rng, count, &mut |q: &[f64]| {
                if emitted >= count {
                    return;
                }
                let b = plan.batch_of(index);
                for (s, v) in acc.sums[b].iter_mut().zip(q) {
                    *s += v;
                }
                if bad.is_none() && q.iter().any(|v| !v.is_finite()) {
                    bad = Some(index);
                }
                acc.counts[b] += 1;
                index += 1;
                emitted += 1;
            })?;
            if let Some(i) = bad {
                return Err(KlsError::Domain(format!("non-finite sample quantity at index {i}")));
            }
            if emitted != count {
                return Err(KlsError::InternalConsistency(format!("chunk {c} emitted {emitted} of {count} samples")));
            }
            Ok(acc)
        })
        .collect();
    let mut total = BatchSums::zeros(k);
    for p in partials {
        let p = p?;
        for b in 0..BATCHES {
            for j in 0..k {
                total.sums[b][j] += p.sums[b][j];
            }
            total.counts[b] += p.counts[b];
        }
    }
    Ok(total)
}
