use serde::Serialize;
use thiserror::Error;

use crate::queue::{QueueConfiguration, WaveRecord};
use crate::Observer;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TailError {
    #[error("no steps after burn-in {burn_in}")]
    EmptyWindow { burn_in: u64 },
}

/// Time-averaged frequencies of `{W(t) > j}` over a window of steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub j_grid: Vec<u64>,
    /// `N_j`: number of steps in the window with `W(t) > j`.
    pub counts: Vec<u64>,
    /// Window length `τ − burn_in`.
    pub steps: u64,
    pub burn_in: u64,
    pub rho_hat: Vec<f64>,
    /// Batch-means standard errors (NaN with fewer than two batches).
    pub se: Vec<f64>,
    /// Censored waves in the window (counted as exceeding every `j`).
    pub censored: u64,
}

impl TailEstimate {
    pub fn rho(&self, j: u64) -> Option<f64> {
        self.j_grid.iter().position(|&g| g == j).map(|i| self.rho_hat[i])
    }
}

/// Streaming counter of `{W(t) > j}` for a fixed grid, usable as an observer.
#[derive(Debug, Clone)]
pub struct TailCounter {
    j_grid: Vec<u64>,
    burn_in: u64,
    batch_len: u64,
    counts: Vec<u64>,
    batch: Vec<u64>,
    batch_fill: u64,
    batches: Vec<Vec<u64>>,
    steps: u64,
    censored: u64,
}

impl TailCounter {
    pub const DEFAULT_BATCH: u64 = 20_000;

    pub fn new(j_grid: &[u64], burn_in: u64) -> Self {
        Self::with_batch(j_grid, burn_in, Self::DEFAULT_BATCH)
    }

    pub fn with_batch(j_grid: &[u64], burn_in: u64, batch_len: u64) -> Self {
        assert!(batch_len > 0);
        Self {
            j_grid: j_grid.to_vec(),
            burn_in,
            batch_len,
            counts: vec![0; j_grid.len()],
            batch: vec![0; j_grid.len()],
            batch_fill: 0,
            batches: Vec::new(),
            steps: 0,
            censored: 0,
        }
    }

    pub fn push(&mut self, rec: &WaveRecord) {
        if rec.t <= self.burn_in {
            return;
        }
        self.steps += 1;
        self.censored += rec.censored as u64;
        for (k, &j) in self.j_grid.iter().enumerate() {
            if rec.exceeds_rank(j) {
                self.counts[k] += 1;
                self.batch[k] += 1;
            }
        }
        self.batch_fill += 1;
        if self.batch_fill == self.batch_len {
            self.batches.push(std::mem::replace(&mut self.batch, vec![0; self.j_grid.len()]));
            self.batch_fill = 0;
        }
    }

    pub fn estimate(&self) -> Result<TailEstimate, TailError> {
        if self.steps == 0 {
            return Err(TailError::EmptyWindow { burn_in: self.burn_in });
        }
        let n = self.steps as f64;
        let rho_hat = self.counts.iter().map(|&c| c as f64 / n).collect();
        let b = self.batches.len();
        let se = (0..self.j_grid.len())
            .map(|k| {
                if b < 2 {
                    return f64::NAN;
                }
                let rates: Vec<f64> =
                    self.batches.iter().map(|v| v[k] as f64 / self.batch_len as f64).collect();
                super::mean_se(&rates).1
            })
            .collect();
        Ok(TailEstimate {
            j_grid: self.j_grid.clone(),
            counts: self.counts.clone(),
            steps: self.steps,
            burn_in: self.burn_in,
            rho_hat,
            se,
            censored: self.censored,
        })
    }
}

impl Observer for TailCounter {
    fn on_step(&mut self, record: &WaveRecord, _config: &mut QueueConfiguration) {
        self.push(record);
    }
}

/// Tail frequencies from a stored record stream; steps `t ≤ burn_in` are skipped.
pub fn wave_tail(records: &[WaveRecord], j_grid: &[u64], burn_in: u64) -> Result<TailEstimate, TailError> {
    let window = records.iter().filter(|r| r.t > burn_in).count() as u64;
    let max_j = j_grid.iter().copied().max().unwrap_or(0);
    if window > 0 && window < 10 * max_j {
        log::warn!("tail window of {window} steps is short for j up to {max_j}");
    }
    let batch = (window / 50).max(1);
    let mut counter = TailCounter::with_batch(j_grid, burn_in, batch);
    for r in records {
        counter.push(r);
    }
    counter.estimate()
}
