//! Reproducible runs behind the command line tool and the acceptance suite.
//!
//! One long queue run ([`main_run`]) feeds the tail, block, point-process and
//! structure checks; walk, coalescence and particle checks run on their own.
//! Every experiment takes its randomness from a [`SeedTree`](crate::SeedTree),
//! so a fixed seed gives identical verdicts.

mod checks;
mod criteria;
mod main_run;
mod trajectories;

use std::fmt;

use serde::Serialize;

pub use checks::{StructureChecker, StructureReport, Violation};
pub use criteria::*;
pub use main_run::{main_run, zeta_samples, BlockSampler, ExceedanceSink, MainRun, MainRunConfig};
pub use trajectories::{trajectory_run, TrajectoryConfig, TrajectoryRun};

/// Acceptance tolerances.
pub mod tol {
    pub const SLOPE_BAND: (f64, f64) = (-0.62, -0.40);
    pub const R2_MIN: f64 = 0.98;
    pub const TAIL_RUNTIME_SECS: f64 = 300.0;
    pub const RATE_JS: [u64; 2] = [256, 1024];
    pub const RATE_REL_TOL: f64 = 0.20;
    pub const BLOCK_TOL: f64 = 1e-9;
    pub const BLOCK_MIN_INSTANCES: usize = 1_000;
    pub const SPREAD_FACTOR_MAX: f64 = 2.4;
    pub const KS_ALPHA: f64 = 0.01;
    pub const ENVELOPE_RATIO_MAX: f64 = 1.5;
    pub const GOODNESS_LIMIT: f64 = 0.5;
    pub const GOODNESS_SE_MULT: f64 = 3.0;
    pub const DENSITY_SCALING_TOL: f64 = 0.05;
    pub const MEETING_Z_MAX: f64 = 3.0;
    pub const INTENSITY_REL_TOL: f64 = 0.15;
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(id: u8, name: &'static str, pass: bool, detail: String) -> Self {
        Self { id, name, pass, detail }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} [{}] {}: {}", self.id, self.name, status, self.detail)
    }
}
