//! Monte Carlo sampling of count histograms.
//!
//! Generator: ChaCha8 (`rand_chacha`). Repetitions are split into chunks of
//! [`CHUNK_SIZE`]; chunk `i` uses `ChaCha8Rng::seed_from_u64(seed)` with
//! stream `i`, so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CountHistogram, CountModel};
use crate::error::{invalid, Result};

pub const CHUNK_SIZE: u64 = 1 << 16;

/// Generator for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Inverse-CDF sampler over a probability table.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(table: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = table
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = f64::INFINITY;
        }
        Self { cdf }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u)
    }
}

/// Draw `repetitions` counts from a probability table.
pub fn sample_counts_table(table: &[f64], repetitions: u64, seed: u64) -> Vec<u64> {
    let sampler = InverseCdf::new(table);
    let chunks = repetitions.div_ceil(CHUNK_SIZE);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let n = CHUNK_SIZE.min(repetitions - c * CHUNK_SIZE);
            let mut h = vec![0u64; table.len()];
            for _ in 0..n {
                h[sampler.sample(&mut rng)] += 1;
            }
            h
        })
        .collect();
    let mut out = vec![0u64; table.len()];
    for h in partial {
        for (o, x) in out.iter_mut().zip(h) {
            *o += x;
        }
    }
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out
}

/// Histogram of `repetitions` draws from `model`; deterministic given `seed`.
pub fn sample_histogram(
    model: &CountModel,
    repetitions: u64,
    seed: u64,
    window_s: Option<f64>,
) -> Result<CountHistogram> {
    if repetitions == 0 {
        return Err(invalid("need at least one repetition"));
    }
    CountHistogram::new(
        sample_counts_table(&model.pmf_table(), repetitions, seed),
        window_s,
    )
}
