use serde::{Deserialize, Serialize};

use super::main_run::stratified_times;
use crate::queue::{DistributionSpec, MultiTracker, Observer, Simulation, SpacingDistribution, StoppingRule};
use crate::representation::{trajectory_points, CountingFunction, GGraph, PlanarSample};
use crate::seed::{SeedTree, Stream};
use crate::stats::mean_se;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub dist: DistributionSpec,
    pub seed: u64,
    pub rule: StoppingRule,
    pub burn_in: u64,
    pub n: u64,
    pub replicates: usize,
    pub horizon_cap: usize,
    /// Consecutive graphs `G(t, ·)` kept around the first reference step.
    pub graphs: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            dist: DistributionSpec::Uniform { lo: 0.5, hi: 1.5 },
            seed: 20_240_605,
            rule: StoppingRule::OwnPosition,
            burn_in: 100_000,
            n: 4096,
            replicates: 20,
            horizon_cap: crate::queue::DEFAULT_HORIZON_CAP,
            graphs: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRun {
    pub t_refs: Vec<u64>,
    pub samples: Vec<PlanarSample>,
    /// Mean number of moves with normalised time in `(0, 1]`, with its SE.
    /// Near position `n` the move rate is `ρ₁/σ` per unit.
    pub early_rate: (f64, f64),
    #[serde(skip)]
    pub graphs: Vec<GGraph>,
}

/// Follows the customer nearest position `n` at each reference step until it
/// is served.
pub fn trajectory_run(cfg: &TrajectoryConfig) -> TrajectoryRun {
    let dist = SpacingDistribution::new(&cfg.dist).expect("valid distribution");
    let seeds = SeedTree::new(cfg.seed);
    // Each individual needs about n steps to reach the head; leave room for that.
    let span = (cfg.n as f64 * 1.5) as u64;
    let steps = cfg.burn_in + span * (cfg.replicates as u64 + 1);
    let mut schedule = seeds.rng(Stream::Schedule, 1);
    let t_refs = stratified_times(cfg.burn_in, cfg.burn_in + span * cfg.replicates as u64, cfg.replicates, &mut schedule);

    let mut sim = Simulation::seeded(dist, &seeds, 0).with_horizon_cap(cfg.horizon_cap).with_rule(cfg.rule);
    let mut tracker = MultiTracker::new();
    let mut labels = Vec::new();
    let mut graphs = Vec::new();
    let x_max = 2.0 * cfg.n as f64;
    let mut next = 0;
    for _ in 0..steps {
        let rec = sim.step();
        let cfg_now = sim.config_mut();
        tracker.on_step(&rec, cfg_now);
        if let Some(first) = t_refs.first() {
            if rec.t >= *first && graphs.len() < cfg.graphs {
                graphs.push(GGraph::new(rec.t, CountingFunction::from_config(cfg_now, x_max)));
            }
        }
        if t_refs.get(next) == Some(&rec.t) {
            next += 1;
            let k = nearest_rank(cfg_now, cfg.n as f64);
            let s = rec.t + k as u64;
            // Two references can pick the same individual; follow it once.
            if !labels.iter().any(|&(l, _)| l == s) && tracker.track(s, rec.t, cfg_now).is_ok() {
                labels.push((s, rec.t));
            }
        }
        if next == t_refs.len() && tracker.live().next().is_none() {
            break;
        }
    }
    let records = tracker.into_records();
    let samples: Vec<PlanarSample> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, &(s, t_ref))| {
            let r = records.iter().find(|r| r.s == s)?;
            Some(trajectory_points(r, cfg.n, t_ref, s, i as u64))
        })
        .collect();
    let early: Vec<f64> =
        samples.iter().map(|p| p.points.iter().filter(|(a, _)| *a > 0.0 && *a <= 1.0).count() as f64).collect();
    TrajectoryRun { t_refs, samples, early_rate: mean_se(&early), graphs }
}

fn nearest_rank(config: &mut crate::queue::QueueConfiguration, x: f64) -> usize {
    let k = config.count_at_or_below(x);
    let below = config.position(k - 1);
    let above = config.position(k);
    if x - below <= above - x {
        k - 1
    } else {
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_approach_the_head() {
        let cfg = TrajectoryConfig { burn_in: 2_000, n: 256, replicates: 4, ..Default::default() };
        let run = trajectory_run(&cfg);
        assert!(!run.samples.is_empty());
        for p in &run.samples {
            // Second components increase as the individual moves forward.
            assert!(p.points.windows(2).all(|w| w[1].1 > w[0].1 && w[1].0 > w[0].0));
            assert!(p.truncated || p.points.last().map(|q| q.1) == Some(16.0));
        }
        assert_eq!(run.graphs.len(), cfg.graphs);
    }
}
