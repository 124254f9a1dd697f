use serde::Serialize;

use crate::queue::{TrajectoryRecord, WaveRecord};

/// Which wave length is compared with the threshold `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Threshold {
    /// `L(t) > n`.
    Position,
    /// `W(t) > n`.
    Rank,
}

/// Sorted points on a window of the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointProcessSample {
    pub points: Vec<f64>,
    pub window: (f64, f64),
    pub replicate: u64,
}

impl PointProcessSample {
    pub fn new(mut points: Vec<f64>, window: (f64, f64), replicate: u64) -> Self {
        points.sort_by(f64::total_cmp);
        Self { points, window, replicate }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points per unit length.
    pub fn intensity(&self) -> f64 {
        self.points.len() as f64 / (self.window.1 - self.window.0)
    }

    /// Gaps between consecutive points.
    pub fn spacings(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `{(t − t_ref)/(σ√n) : L(t) > n}` (or `W(t) > n`) restricted to `window`.
///
/// Censored waves count as exceeding every threshold.
pub fn wave_time_points(
    records: &[WaveRecord],
    n: u64,
    t_ref: u64,
    sigma: f64,
    window: (f64, f64),
    threshold: Threshold,
    replicate: u64,
) -> PointProcessSample {
    let scale = sigma * (n as f64).sqrt();
    let points = records
        .iter()
        .filter(|r| match threshold {
            Threshold::Position => r.exceeds_position(n as f64),
            Threshold::Rank => r.exceeds_rank(n),
        })
        .map(|r| (r.t as f64 - t_ref as f64) / scale)
        .filter(|y| *y >= window.0 && *y < window.1)
        .collect();
    PointProcessSample::new(points, window, replicate)
}

/// Normalised moves of one individual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarSample {
    /// `((t_u − t_ref)/√n, (n − x_u)/√n)` in move order.
    pub points: Vec<(f64, f64)>,
    /// The individual reached the head before `t_end`.
    pub truncated: bool,
    pub replicate: u64,
}

/// Moves in `(t_ref, t_end]` of an individual near position `n` at `t_ref`.
pub fn trajectory_points(
    trajectory: &TrajectoryRecord,
    n: u64,
    t_ref: u64,
    t_end: u64,
    replicate: u64,
) -> PlanarSample {
    let r = (n as f64).sqrt();
    let points = trajectory
        .moves
        .iter()
        .filter(|m| m.t > t_ref && m.t <= t_end)
        .map(|m| ((m.t - t_ref) as f64 / r, (n as f64 - m.x) / r))
        .collect();
    PlanarSample { points, truncated: trajectory.served && trajectory.s < t_end, replicate }
}
