//! Coalescing Brownian particles: the reference side of every comparison.
//!
//! Particles follow Euler steps of Brownian motion. Two neighbouring clusters
//! merge when their paths cross within a step, or, with the Brownian-bridge
//! probability `exp(−d₀d₁/Δ)`, when they may have touched in between. The
//! merged cluster keeps the path of its left (lower-start) member.

mod density;
mod system;

pub use density::{
    estimate_density, meeting_probability, no_meet_oracle, rho1, rho1_ladder, time1_points,
    DensityConfig, DensityEstimate, MeetingEstimate, Rho1Estimate,
};
pub use system::{CbmError, Increment, ParticleSystem};
