//! Simulation and statistics for the spatial queue with wave dynamics.
//!
//! The crate is organised around four layers:
//!
//! * [`queue`] evolves the queue Markov chain exactly, tracks individuals and
//!   exposes the block (last-move) structure of a configuration.
//! * [`stats`] turns wave records and block snapshots into tail rates,
//!   power-law fits, walk-maximum probabilities and goodness-of-fit tests.
//! * [`representation`] maps configurations onto centred counting functions
//!   and the coalescing family `G(t, ·)`, and extracts the wave-time point
//!   processes that are compared against coalescing Brownian motion.
//! * [`cbm`] is an independent coalescing-particle simulator that supplies the
//!   reference density `ρ₁` and time-1 particle positions.
//!
//! [`experiments`] wires these together into the reproducible runs driven by
//! the `wavefront` command line tool and the acceptance suite.

pub mod cbm;
pub mod experiments;
pub mod export;
pub mod queue;
pub mod representation;
pub mod seed;
pub mod stats;

pub use queue::{
    DistributionError, DistributionSpec, Observer, QueueConfiguration, Simulation,
    SpacingDistribution, StoppingRule, TailLaw, TrajectoryRecord, WaveRecord,
};
pub use seed::{SeedTree, SimRng, Stream};
