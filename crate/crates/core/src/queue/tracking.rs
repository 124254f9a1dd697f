use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::QueueConfiguration;
use super::simulation::Observer;
use super::WaveRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrackError {
    #[error("individual {s} is already at the head or gone at step {t}")]
    AlreadyServed { s: u64, t: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub t: u64,
    pub x: f64,
}

/// Move history of individual `s`, the customer that reaches the head at step `s`.
///
/// At step `t ≤ s` the individual has rank `s − t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub s: u64,
    /// Step at which tracking began, with the position then.
    pub start_t: u64,
    pub start_position: f64,
    pub moves: Vec<Move>,
    /// Set once the individual has reached rank 0.
    pub served: bool,
}

impl TrajectoryRecord {
    pub fn rank_at(&self, t: u64) -> Option<u64> {
        self.s.checked_sub(t)
    }

    /// Position after step `t` (or at the start if `t` precedes every move).
    pub fn position_at(&self, t: u64) -> f64 {
        match self.moves.partition_point(|m| m.t <= t) {
            0 => self.start_position,
            k => self.moves[k - 1].x,
        }
    }
}

/// Tracks a set of individuals through a run.
#[derive(Debug, Default, Clone)]
pub struct MultiTracker {
    live: BTreeMap<u64, TrajectoryRecord>,
    done: Vec<TrajectoryRecord>,
    pending: Vec<u64>,
}

impl MultiTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Individuals to pick up when the run starts.
    pub fn with_labels<I: IntoIterator<Item = u64>>(labels: I) -> Self {
        Self { pending: labels.into_iter().collect(), ..Self::default() }
    }

    /// Starts tracking `s` at the current step `t`.
    pub fn track(&mut self, s: u64, t: u64, config: &mut QueueConfiguration) -> Result<(), TrackError> {
        if s <= t {
            return Err(TrackError::AlreadyServed { s, t });
        }
        let start_position = config.position((s - t) as usize);
        self.live.insert(
            s,
            TrajectoryRecord { s, start_t: t, start_position, moves: Vec::new(), served: false },
        );
        Ok(())
    }

    pub fn live(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.live.values()
    }

    pub fn finished(&self) -> &[TrajectoryRecord] {
        &self.done
    }

    /// All records, finished first, then live ones in label order.
    pub fn into_records(self) -> Vec<TrajectoryRecord> {
        let mut out = self.done;
        out.extend(self.live.into_values());
        out
    }
}

impl Observer for MultiTracker {
    fn on_start(&mut self, t: u64, config: &mut QueueConfiguration) {
        for s in std::mem::take(&mut self.pending) {
            // Labels already at or past the head cannot be followed; skip them.
            let _ = self.track(s, t, config);
        }
    }

    fn on_step(&mut self, record: &WaveRecord, config: &mut QueueConfiguration) {
        let t = record.t;
        // Individual s moved iff its new rank s − t is below W.
        let upper = if record.censored { u64::MAX } else { t.saturating_add(record.w) };
        for (&s, rec) in self.live.range_mut(t..upper) {
            let rank = (s - t) as usize;
            rec.moves.push(Move { t, x: config.position(rank) });
            if s == t {
                rec.served = true;
            }
        }
        if let Some(rec) = self.live.remove(&t) {
            self.done.push(rec);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{Simulation, SpacingDistribution};
    use crate::seed::SeedTree;

    #[test]
    fn moves_follow_wave_membership() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut sim = Simulation::seeded(d, &SeedTree::new(4), 0).with_horizon_cap(100_000);
        let mut tracker = MultiTracker::with_labels([5, 40, 300]);
        let mut sink = crate::queue::RecordSink::default();
        sim.run(400, &mut [&mut tracker, &mut sink]);
        let recs = tracker.into_records();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            assert!(r.served);
            let expected: Vec<u64> = sink
                .records
                .iter()
                .filter(|w| w.t <= r.s && w.exceeds_rank(r.s - w.t))
                .map(|w| w.t)
                .collect();
            let got: Vec<u64> = r.moves.iter().map(|m| m.t).collect();
            assert_eq!(got, expected);
            assert_eq!(r.moves.last().unwrap(), &Move { t: r.s, x: 0.0 });
            assert!(r.moves.windows(2).all(|w| w[1].x < w[0].x && w[1].t > w[0].t));
        }
    }

    #[test]
    fn cannot_track_a_served_individual() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut sim = Simulation::seeded(d, &SeedTree::new(4), 0);
        sim.run_collect(10);
        let mut tracker = MultiTracker::new();
        assert_eq!(
            tracker.track(10, 10, sim.config_mut()),
            Err(TrackError::AlreadyServed { s: 10, t: 10 })
        );
        assert!(tracker.track(11, 10, sim.config_mut()).is_ok());
    }
}
