//! Centred counting functions, the coalescing family `G(t, ·)`, and the
//! rescaled point processes read off it.

mod counting;
mod family;
mod points;

pub use counting::{coalescence_position, g_at, previous_positions, Coalescence, CountingFunction, GGraph};
pub use family::{FamilyError, GraphRecorder, Member, RescaledFamily};
pub use points::{trajectory_points, wave_time_points, PlanarSample, PointProcessSample, Threshold};
