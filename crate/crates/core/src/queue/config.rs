use thiserror::Error;

use super::distribution::SpacingDistribution;
use super::{StoppingRule, WaveRecord};
use crate::seed::SimRng;

/// Law of the not-yet-materialised part of the queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailLaw {
    /// Spacings drawn i.i.d. from the spacing law.
    Iid,
    /// Every spacing equals the given length (adversarial starts).
    Lattice(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("configuration must start with the head at position 0")]
    HeadNotAtZero,
    #[error("positions must be strictly increasing (rank {0})")]
    NotIncreasing(usize),
    #[error("lattice spacing must be positive, got {0}")]
    BadLattice(f64),
}

/// Start-up slack before the storage is compacted.
const COMPACT_MIN: usize = 1 << 15;

/// Positions `0 = x_0 < x_1 < …` of the infinite queue.
///
/// Only a finite prefix is materialised; ranks beyond it are generated on
/// demand from the [`TailLaw`]. Positions are stored as absolute distances
/// from the service point, so the customers a wave does not reach keep their
/// stored value bit for bit. Each rank also carries the step of its last move
/// (0 = never moved since the start of the run).
#[derive(Debug, Clone)]
pub struct QueueConfiguration {
    positions: Vec<f64>,
    last_move: Vec<u64>,
    offset: usize,
    tail: TailLaw,
    tail_epoch: u64,
    dist: SpacingDistribution,
    rng: SimRng,
    /// Pre-step positions of ranks `1..=W+1`, kept only when enabled.
    journal: Option<Vec<f64>>,
}

impl QueueConfiguration {
    /// I.i.d. start: every spacing is an independent draw from `dist`.
    pub fn iid(dist: SpacingDistribution, rng: SimRng) -> Self {
        Self {
            positions: vec![0.0],
            last_move: vec![0],
            offset: 0,
            tail: TailLaw::Iid,
            tail_epoch: 0,
            dist,
            rng,
            journal: None,
        }
    }

    /// Deterministic start with all spacings equal to `spacing`.
    pub fn lattice(spacing: f64, dist: SpacingDistribution, rng: SimRng) -> Result<Self, ConfigError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(ConfigError::BadLattice(spacing));
        }
        let mut cfg = Self::iid(dist, rng);
        cfg.tail = TailLaw::Lattice(spacing);
        Ok(cfg)
    }

    /// Explicit prefix `positions` (must start at 0), continued by `tail`.
    pub fn from_positions(
        positions: &[f64],
        tail: TailLaw,
        dist: SpacingDistribution,
        rng: SimRng,
    ) -> Result<Self, ConfigError> {
        if positions.first() != Some(&0.0) {
            return Err(ConfigError::HeadNotAtZero);
        }
        if let Some(i) = positions.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(ConfigError::NotIncreasing(i + 1));
        }
        if let TailLaw::Lattice(s) = tail {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError::BadLattice(s));
            }
        }
        Ok(Self {
            positions: positions.to_vec(),
            last_move: vec![0; positions.len()],
            offset: 0,
            tail,
            tail_epoch: 0,
            dist,
            rng,
            journal: None,
        })
    }

    /// Keeps the positions a step overwrites, so the previous configuration
    /// can be rebuilt (see [`Self::journal`]).
    pub fn enable_journal(&mut self) {
        self.journal.get_or_insert_with(Vec::new);
    }

    /// Positions of ranks `1..=W+1` before the last step. Together with the
    /// current ranks `≥ W + 1` they give the whole previous configuration,
    /// unless the step was censored.
    pub fn journal(&self) -> Option<&[f64]> {
        self.journal.as_deref()
    }

    pub fn distribution(&self) -> &SpacingDistribution {
        &self.dist
    }

    pub fn tail_law(&self) -> TailLaw {
        self.tail
    }

    /// Number of materialised ranks, head included.
    pub fn generated_len(&self) -> usize {
        self.positions.len() - self.offset
    }

    /// Materialised positions, indexed by rank.
    pub fn positions(&self) -> &[f64] {
        &self.positions[self.offset..]
    }

    /// Last-move steps of the materialised ranks (0 = never moved).
    pub fn last_moves(&self) -> &[u64] {
        &self.last_move[self.offset..]
    }

    pub fn get(&self, rank: usize) -> Option<f64> {
        self.positions.get(self.offset + rank).copied()
    }

    /// Position of `rank`, materialising the tail as needed.
    pub fn position(&mut self, rank: usize) -> f64 {
        self.ensure_rank(rank);
        self.positions[self.offset + rank]
    }

    /// Spacing `x_i − x_{i−1}` for `i ≥ 1`.
    pub fn spacing(&mut self, i: usize) -> f64 {
        assert!(i >= 1, "spacing index starts at 1");
        self.position(i) - self.position(i - 1)
    }

    pub fn last_move(&mut self, rank: usize) -> u64 {
        self.ensure_rank(rank);
        self.last_move[self.offset + rank]
    }

    pub fn ensure_rank(&mut self, rank: usize) {
        while self.offset + rank >= self.positions.len() {
            self.extend_one();
        }
    }

    /// Materialises ranks until the last stored position exceeds `x`.
    pub fn ensure_beyond(&mut self, x: f64) {
        while *self.positions.last().unwrap() <= x {
            self.extend_one();
        }
    }

    /// `#{k ≥ 0 : x_k ≤ x}`, i.e. one more than the largest rank at or before `x`.
    pub fn count_at_or_below(&mut self, x: f64) -> usize {
        if x < 0.0 {
            return 0;
        }
        self.ensure_beyond(x);
        self.positions().partition_point(|p| *p <= x)
    }

    #[inline]
    fn extend_one(&mut self) {
        let last = *self.positions.last().unwrap();
        let gap = match self.tail {
            TailLaw::Iid => self.dist.sample(&mut self.rng),
            TailLaw::Lattice(s) => s,
        };
        self.positions.push(last + gap);
        self.last_move.push(self.tail_epoch);
    }

    /// Applies one service step at time `t` with step draws supplied by `draw`.
    ///
    /// `draw` is called once per tested index, in order `ξ_1, ξ_2, …`. The
    /// wave stops at the first index `i` for which the stopping rule holds; if
    /// `horizon_cap` indices all fail the test the wave is censored and every
    /// spacing is replaced by fresh draws from the spacing law.
    pub fn advance<F: FnMut() -> f64>(
        &mut self,
        t: u64,
        horizon_cap: usize,
        rule: StoppingRule,
        mut draw: F,
    ) -> WaveRecord {
        assert!(horizon_cap >= 1, "horizon cap must be at least 1");
        let c_plus = self.dist.c_plus();
        let base = self.offset;
        // Position already assigned to the predecessor of the customer under test.
        let mut lead = 0.0;
        let mut i = 1usize;
        if let Some(j) = self.journal.as_mut() {
            j.clear();
        }
        loop {
            let slot = base + i + 1;
            // Keep one unread rank beyond `slot`: the tail extends from the last
            // stored position, which must not be one already overwritten.
            while slot + 1 >= self.positions.len() {
                self.extend_one();
            }
            let old = self.positions[slot];
            if let Some(j) = self.journal.as_mut() {
                if i == 1 {
                    j.push(self.positions[slot - 1]);
                }
                j.push(old);
            }
            let threshold = old - c_plus;
            let moved_to = match rule {
                StoppingRule::OwnPosition => {
                    let candidate = lead + draw();
                    (candidate < threshold).then_some(candidate)
                }
                StoppingRule::PredecessorPosition => {
                    (lead < threshold).then(|| lead + draw())
                }
            };
            match moved_to {
                None => {
                    self.offset += 1;
                    self.positions[self.offset] = 0.0;
                    self.last_move[self.offset] = t;
                    self.maybe_compact();
                    return WaveRecord { t, w: i as u64, l: old, censored: false };
                }
                Some(x) => {
                    self.positions[slot] = x;
                    self.last_move[slot] = t;
                    lead = x;
                }
            }
            if i == horizon_cap {
                // `old` was the furthest customer reached; the true extent lies beyond it.
                self.reset_after_censoring(t);
                return WaveRecord { t, w: i as u64, l: old, censored: true };
            }
            i += 1;
        }
    }

    fn reset_after_censoring(&mut self, t: u64) {
        self.positions.clear();
        self.last_move.clear();
        self.offset = 0;
        self.positions.push(0.0);
        self.last_move.push(t);
        self.tail = TailLaw::Iid;
        // Regenerated ranks count as moved by the censored (unbounded) wave.
        self.tail_epoch = t;
    }

    fn maybe_compact(&mut self) {
        if self.offset >= COMPACT_MIN && 2 * self.offset >= self.positions.len() {
            self.positions.drain(..self.offset);
            self.last_move.drain(..self.offset);
            self.offset = 0;
        }
    }
}
