//! The spatial queue Markov chain.
//!
//! At each service step the head customer leaves, and a wave of customers
//! moves up: customer `i` (new rank) is placed at `ξ_1 + … + ξ_i` with
//! `ξ` i.i.d. from the spacing law, until the first index `W` for which
//! `ξ_1 + … + ξ_W ≥ x_{W+1} − c⁺`. Customers from rank `W` on keep their
//! positions.

mod blocks;
mod config;
mod distribution;
mod simulation;
mod tracking;

pub use blocks::{BlockDecomposition, BlockError};
pub use config::{ConfigError, QueueConfiguration, TailLaw};
pub use distribution::{DistributionError, DistributionSpec, SpacingDistribution};
pub use simulation::{Observer, RecordSink, Simulation, DEFAULT_HORIZON_CAP};
pub use tracking::{Move, MultiTracker, TrackError, TrajectoryRecord};

use serde::{Deserialize, Serialize};

/// Which position the stopping test compares against `x_{i+1} − c⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// The prospective new position `ξ_1 + … + ξ_i` of the tested customer.
    #[default]
    OwnPosition,
    /// The new position `ξ_1 + … + ξ_{i−1}` of the customer in front.
    PredecessorPosition,
}

impl std::str::FromStr for StoppingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "own" | "own-position" => Ok(Self::OwnPosition),
            "predecessor" | "predecessor-position" => Ok(Self::PredecessorPosition),
            _ => Err(format!("unknown stopping rule `{s}` (own | predecessor)")),
        }
    }
}

/// Outcome of one service step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveRecord {
    /// Step index, starting at 1.
    pub t: u64,
    /// Wave length by rank: number of customers that moved, head included.
    pub w: u64,
    /// Wave length by position: where the first unmoved customer stands.
    /// For a censored wave this is the furthest position reached.
    pub l: f64,
    /// The wave hit the horizon cap.
    pub censored: bool,
}

impl WaveRecord {
    /// Whether the wave moved more than `j` customers (censored waves always do).
    pub fn exceeds_rank(&self, j: u64) -> bool {
        self.censored || self.w > j
    }

    /// Whether the wave reached past position `x` (censored waves always do).
    pub fn exceeds_position(&self, x: f64) -> bool {
        self.censored || self.l > x
    }
}
