use std::sync::OnceLock;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::{CbmError, Increment, ParticleSystem};
use crate::representation::PointProcessSample;
use crate::seed::{SeedTree, Stream};
use crate::stats::mean_se;

/// Clusters per unit length at time `t`, from a grid start of spacing `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub eps: f64,
    pub t: f64,
    /// Length of the counting window (interval minus both margins).
    pub window: f64,
    pub replicates: usize,
    pub rho_hat: f64,
    pub se: f64,
}

/// Parameters of a density run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    /// Grid spacings of the refinement ladder, coarse to fine.
    pub eps_ladder: Vec<f64>,
    pub t: f64,
    /// Length `Λ` of the start interval `[0, Λ]`.
    pub lambda: f64,
    pub replicates: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.05, 0.02, 0.01],
            t: 1.0,
            lambda: 48.0,
            replicates: 400,
            dt: 1e-4,
            seed: 0x5eed_c0a1,
        }
    }
}

/// Grid start on `[0, Λ]`, clusters counted in `[m, Λ − m]` with `m = 4√t`.
///
/// Replicate `k` uses particle stream `stream_base + k`.
pub fn estimate_density(
    eps: f64,
    lambda: f64,
    t: f64,
    replicates: usize,
    dt: f64,
    seeds: &SeedTree,
    stream_base: u64,
) -> DensityEstimate {
    assert!(replicates > 0);
    if eps > 0.05 * t.sqrt() {
        warn!("grid spacing {eps} is coarse for t = {t}; the density will be underestimated");
    }
    let margin = 4.0 * t.sqrt();
    let (lo, hi) = (margin, lambda - margin);
    assert!(hi > lo, "interval {lambda} shorter than twice the margin {margin}");
    let counts: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeds.rng(Stream::Particles, stream_base + k);
            let mut sys = ParticleSystem::grid(0.0, lambda, eps, dt, Increment::Gaussian);
            sys.evolve(t, &mut rng).expect("t is a multiple of dt");
            count_in(sys.clusters(), lo, hi) as f64 / (hi - lo)
        })
        .collect();
    let (rho_hat, se) = mean_se(&counts);
    DensityEstimate { eps, t, window: hi - lo, replicates, rho_hat, se }
}

fn count_in(sorted: &[f64], lo: f64, hi: f64) -> usize {
    sorted.partition_point(|x| *x < hi) - sorted.partition_point(|x| *x < lo)
}

/// Extrapolated `ρ₁` with its ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rho1Estimate {
    pub rungs: Vec<DensityEstimate>,
    /// Intercept of the weighted fit `ρ(ε) = a + bε²`, rescaled to `t = 1`.
    pub rho1: f64,
    pub se: f64,
}

/// Runs the ladder and extrapolates to `ε → 0`.
///
/// Fails if a finer rung falls below a coarser one by more than three
/// combined standard errors: the exact grid density `erf(ε/2√t)/ε` is
/// decreasing in `ε`.
pub fn rho1_ladder(cfg: &DensityConfig) -> Result<Rho1Estimate, CbmError> {
    let seeds = SeedTree::new(cfg.seed);
    let rungs: Vec<DensityEstimate> = cfg
        .eps_ladder
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            estimate_density(eps, cfg.lambda, cfg.t, cfg.replicates, cfg.dt, &seeds, (i as u64) << 32)
        })
        .collect();
    for w in rungs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let tol = 3.0 * a.se.hypot(b.se);
        if b.eps < a.eps && b.rho_hat < a.rho_hat - tol {
            return Err(CbmError::NonMonotone(format!(
                "rho({}) = {:.5} < rho({}) = {:.5} - {:.5}",
                b.eps, b.rho_hat, a.eps, a.rho_hat, tol
            )));
        }
    }
    let (a, se_a) = extrapolate(&rungs);
    let scale = cfg.t.sqrt();
    Ok(Rho1Estimate { rungs, rho1: a * scale, se: se_a * scale })
}

/// Weighted least squares of `ρ` on `ε²`; one rung gives that rung.
fn extrapolate(rungs: &[DensityEstimate]) -> (f64, f64) {
    if rungs.len() == 1 {
        return (rungs[0].rho_hat, rungs[0].se);
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rungs {
        let w = 1.0 / (r.se * r.se).max(1e-300);
        let x = r.eps * r.eps;
        sw += w;
        sx += w * x;
        sy += w * r.rho_hat;
        sxx += w * x * x;
        sxy += w * x * r.rho_hat;
    }
    let det = sw * sxx - sx * sx;
    let a = (sxx * sy - sx * sxy) / det;
    (a, (sxx / det).sqrt())
}

static RHO1: OnceLock<Result<Rho1Estimate, CbmError>> = OnceLock::new();

/// `ρ₁` from the default ladder, computed once per process.
pub fn rho1() -> Result<&'static Rho1Estimate, &'static CbmError> {
    RHO1.get_or_init(|| rho1_ladder(&DensityConfig::default())).as_ref()
}

/// Empirical probability that two particles started `d` apart have not met by `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeetingEstimate {
    pub d: f64,
    pub t: f64,
    pub replicates: usize,
    pub no_meet: f64,
    pub se: f64,
    pub oracle: f64,
}

impl MeetingEstimate {
    pub fn z_score(&self) -> f64 {
        (self.no_meet - self.oracle) / self.se.max(1e-12)
    }
}

/// Reflection principle: the gap is a Brownian motion of variance `2t`.
pub fn no_meet_oracle(d: f64, t: f64) -> f64 {
    statrs::function::erf::erf(d / (4.0 * t).sqrt())
}

pub fn meeting_probability<R: Rng + ?Sized>(
    d: f64,
    t: f64,
    dt: f64,
    replicates: usize,
    rng: &mut R,
) -> MeetingEstimate {
    let steps = (t / dt).round() as u64;
    let mut alive = 0usize;
    for _ in 0..replicates {
        let mut sys = ParticleSystem::new(vec![0.0, d], dt, Increment::Gaussian);
        for _ in 0..steps {
            sys.step(rng);
            if sys.cluster_count() == 1 {
                break;
            }
        }
        alive += (sys.cluster_count() == 2) as usize;
    }
    let p = alive as f64 / replicates as f64;
    MeetingEstimate {
        d,
        t,
        replicates,
        no_meet: p,
        se: (p * (1.0 - p) / replicates as f64).sqrt(),
        oracle: no_meet_oracle(d, t),
    }
}

/// Cluster positions of an evolved system inside `window`.
pub fn time1_points(system: &ParticleSystem, window: (f64, f64), replicate: u64) -> PointProcessSample {
    let c = system.clusters();
    let (a, b) = (c.partition_point(|x| *x < window.0), c.partition_point(|x| *x < window.1));
    PointProcessSample::new(c[a..b].to_vec(), window, replicate)
}
