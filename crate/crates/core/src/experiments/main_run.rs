use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checks::{StructureChecker, StructureReport};
use crate::queue::{
    BlockDecomposition, DistributionSpec, Observer, QueueConfiguration, Simulation, SpacingDistribution,
    StoppingRule, WaveRecord, DEFAULT_HORIZON_CAP,
};
use crate::representation::{wave_time_points, PointProcessSample, Threshold};
use crate::seed::{SeedTree, SimRng, Stream};
use crate::stats::{block_walk_compare, split_spacings, BlockWalkComparison, SpacingSplit, TailCounter, TailEstimate};

/// Parameters of the long queue run shared by several criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainRunConfig {
    pub dist: DistributionSpec,
    pub seed: u64,
    pub steps: u64,
    pub burn_in: u64,
    pub horizon_cap: usize,
    pub rule: StoppingRule,
    pub j_grid: Vec<u64>,
    /// Evaluation times for the block comparisons, spread over the window.
    pub block_instances: usize,
    pub block_ks: Vec<usize>,
    /// In-block spacings to collect for the conditional-law test.
    pub in_block_target: usize,
    pub ranks_per_instance: usize,
    /// Structural checks run on steps `1..=structure_steps`.
    pub structure_steps: u64,
    pub zeta_n: u64,
    pub zeta_replicates: usize,
    /// Window of normalised time around each reference step.
    pub zeta_window: (f64, f64),
}

impl Default for MainRunConfig {
    fn default() -> Self {
        Self {
            dist: DistributionSpec::Uniform { lo: 0.5, hi: 1.5 },
            seed: 20_240_601,
            steps: 2_000_000,
            burn_in: 100_000,
            horizon_cap: DEFAULT_HORIZON_CAP,
            rule: StoppingRule::OwnPosition,
            j_grid: (4..=10).map(|p| 1 << p).collect(),
            block_instances: 1_000,
            block_ks: vec![100, 400, 1600],
            in_block_target: 10_000,
            ranks_per_instance: 20,
            structure_steps: 1_000_000,
            zeta_n: 4096,
            zeta_replicates: 50,
            zeta_window: (-20.0, 20.0),
        }
    }
}

impl MainRunConfig {
    /// Fields that cannot describe a run, all reported at once.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps == 0 {
            out.push("steps must be positive".into());
        }
        if self.burn_in >= self.steps {
            out.push(format!("burn-in {} must be below steps {}", self.burn_in, self.steps));
        }
        if self.horizon_cap == 0 {
            out.push("horizon cap must be positive".into());
        }
        if self.j_grid.is_empty() || self.j_grid.contains(&0) {
            out.push("j grid must be non-empty and positive".into());
        }
        if self.block_ks.contains(&0) {
            out.push("block ranks must be positive".into());
        }
        if self.zeta_n == 0 {
            out.push("n must be positive".into());
        }
        if !(self.zeta_window.1 > self.zeta_window.0) {
            out.push("point-process window must have positive length".into());
        }
        if let Err(e) = SpacingDistribution::new(&self.dist) {
            out.push(e.to_string());
        }
        out
    }

    /// Steps on either side of a reference step covered by its window.
    fn zeta_reach(&self, sigma: f64) -> (u64, u64) {
        let scale = sigma * (self.zeta_n as f64).sqrt();
        ((-self.zeta_window.0 * scale).ceil().max(0.0) as u64, (self.zeta_window.1 * scale).ceil().max(0.0) as u64)
    }
}

/// One time drawn uniformly from each of `k` equal strata of `(lo, hi]`.
pub(super) fn stratified_times(lo: u64, hi: u64, k: usize, rng: &mut SimRng) -> Vec<u64> {
    if k == 0 || hi <= lo {
        return Vec::new();
    }
    let span = (hi - lo) as f64 / k as f64;
    let mut out: Vec<u64> = (0..k)
        .map(|i| {
            let a = lo + (i as f64 * span) as u64;
            let b = (lo + ((i + 1) as f64 * span) as u64).max(a + 1);
            rng.random_range(a + 1..=b)
        })
        .collect();
    out.dedup();
    out
}

/// Block comparisons and spacing samples at scheduled evaluation times.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    times: Vec<u64>,
    next: usize,
    ks: Vec<usize>,
    dist: SpacingDistribution,
    rng: SimRng,
    ranks_per_instance: usize,
    in_block_target: usize,
    pub comparisons: Vec<BlockWalkComparison>,
    pub spacings: SpacingSplit,
}

impl BlockSampler {
    pub fn new(
        times: Vec<u64>,
        ks: Vec<usize>,
        dist: SpacingDistribution,
        rng: SimRng,
        ranks_per_instance: usize,
        in_block_target: usize,
    ) -> Self {
        Self {
            times,
            next: 0,
            ks,
            dist,
            rng,
            ranks_per_instance,
            in_block_target,
            comparisons: Vec::new(),
            spacings: SpacingSplit::default(),
        }
    }
}

impl Observer for BlockSampler {
    fn on_step(&mut self, rec: &WaveRecord, config: &mut QueueConfiguration) {
        if self.times.get(self.next) != Some(&rec.t) {
            return;
        }
        self.next += 1;
        let k_max = self.ks.iter().copied().max().unwrap_or(1);
        let blocks = BlockDecomposition::at(config, rec.t, k_max, 0).expect("evaluated at the current step");
        for &k in &self.ks {
            let c = block_walk_compare(config, &blocks, k, &self.dist, &mut self.rng).expect("full history known");
            self.comparisons.push(c);
        }
        if self.spacings.in_block.len() < self.in_block_target {
            let ranks: Vec<usize> =
                (0..self.ranks_per_instance).map(|_| self.rng.random_range(1..=k_max)).collect();
            let s = split_spacings(config, &blocks, &ranks);
            let room = self.in_block_target - self.spacings.in_block.len();
            self.spacings.in_block.extend(s.in_block.into_iter().take(room));
        }
        // Every boundary spacing among the first k_max, for the negative control.
        let all: Vec<usize> = (1..=k_max).collect();
        let s = split_spacings(config, &blocks, &all);
        self.spacings.boundary.extend(s.boundary);
        self.spacings.unknown += s.unknown;
    }
}

/// Waves whose position-length exceeds a threshold.
#[derive(Debug, Clone)]
pub struct ExceedanceSink {
    pub threshold: f64,
    pub records: Vec<WaveRecord>,
}

impl Observer for ExceedanceSink {
    fn on_step(&mut self, rec: &WaveRecord, _config: &mut QueueConfiguration) {
        if rec.exceeds_position(self.threshold) {
            self.records.push(*rec);
        }
    }
}

/// Everything the shared run produces.
#[derive(Debug, Clone, Serialize)]
pub struct MainRun {
    pub config: MainRunConfig,
    pub sigma: f64,
    pub elapsed_secs: f64,
    pub tail: TailEstimate,
    pub blocks: Vec<BlockWalkComparison>,
    #[serde(skip)]
    pub spacings: SpacingSplit,
    /// Waves with `L(t) > n`, for the point process.
    pub long_waves: Vec<WaveRecord>,
    pub zeta_refs: Vec<u64>,
    pub zeta: Vec<PointProcessSample>,
    pub structure: StructureReport,
}

/// Runs the shared queue simulation with all its observers.
pub fn main_run(cfg: &MainRunConfig) -> MainRun {
    let problems = cfg.problems();
    assert!(problems.is_empty(), "invalid run: {}", problems.join("; "));
    let dist = SpacingDistribution::new(&cfg.dist).expect("validated");
    let sigma = dist.sigma();
    let seeds = SeedTree::new(cfg.seed);
    let mut schedule = seeds.rng(Stream::Schedule, 0);
    let block_times = stratified_times(cfg.burn_in, cfg.steps, cfg.block_instances, &mut schedule);
    let (before, after) = cfg.zeta_reach(sigma);
    let zeta_refs = stratified_times(
        cfg.burn_in + before,
        cfg.steps.saturating_sub(after),
        cfg.zeta_replicates,
        &mut schedule,
    );

    let mut sim = Simulation::seeded(dist.clone(), &seeds, 0).with_horizon_cap(cfg.horizon_cap).with_rule(cfg.rule);
    let mut tail = TailCounter::new(&cfg.j_grid, cfg.burn_in);
    let mut blocks = BlockSampler::new(
        block_times,
        cfg.block_ks.clone(),
        dist.clone(),
        seeds.rng(Stream::Analysis, 0),
        cfg.ranks_per_instance,
        cfg.in_block_target,
    );
    let mut long = ExceedanceSink { threshold: cfg.zeta_n as f64, records: Vec::new() };
    let mut structure = StructureChecker::new(cfg.structure_steps, dist.c_minus(), dist.c_plus());

    let start = Instant::now();
    let mut observers: Vec<&mut dyn Observer> = vec![&mut tail, &mut blocks, &mut long];
    if cfg.structure_steps > 0 {
        // The checker costs little per step, but needlessly so once it is past its range.
        let first = cfg.structure_steps.min(cfg.steps);
        observers.push(&mut structure);
        sim.run(first, &mut observers);
        observers.pop();
        sim.run(cfg.steps - first, &mut observers);
    } else {
        sim.run(cfg.steps, &mut observers);
    }
    let elapsed_secs = start.elapsed().as_secs_f64();

    let zeta = points_at(&long.records, cfg.zeta_n, &zeta_refs, sigma, cfg.zeta_window);

    MainRun {
        config: cfg.clone(),
        sigma,
        elapsed_secs,
        tail: tail.estimate().expect("steps beyond burn-in"),
        blocks: blocks.comparisons,
        spacings: blocks.spacings,
        long_waves: long.records,
        zeta_refs,
        zeta,
        structure: structure.into_report(),
    }
}

fn points_at(records: &[WaveRecord], n: u64, refs: &[u64], sigma: f64, window: (f64, f64)) -> Vec<PointProcessSample> {
    refs.iter()
        .enumerate()
        .map(|(i, &t_ref)| wave_time_points(records, n, t_ref, sigma, window, Threshold::Position, i as u64))
        .collect()
}

/// Point-process samples for another threshold `n ≥ zeta_n`, with their own
/// reference steps.
pub fn zeta_samples(run: &MainRun, n: u64, replicates: usize) -> Vec<PointProcessSample> {
    assert!(n >= run.config.zeta_n, "only waves beyond {} were kept", run.config.zeta_n);
    let cfg = MainRunConfig { zeta_n: n, ..run.config.clone() };
    let (before, after) = cfg.zeta_reach(run.sigma);
    let mut rng = SeedTree::new(cfg.seed).rng(Stream::Schedule, 2 + n);
    let refs = stratified_times(cfg.burn_in + before, cfg.steps.saturating_sub(after), replicates, &mut rng);
    points_at(&run.long_waves, n, &refs, run.sigma, cfg.zeta_window)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problems_are_listed_together() {
        let cfg = MainRunConfig { steps: 10, burn_in: 10, j_grid: vec![], ..Default::default() };
        assert_eq!(cfg.problems().len(), 2);
    }

    #[test]
    fn strata_cover_the_window() {
        let mut rng = SeedTree::new(1).rng(Stream::Schedule, 0);
        let ts = stratified_times(100, 1100, 10, &mut rng);
        assert_eq!(ts.len(), 10);
        for (i, t) in ts.iter().enumerate() {
            assert!(*t > 100 + 100 * i as u64 && *t <= 100 + 100 * (i as u64 + 1));
        }
    }

    #[test]
    fn small_run_fills_every_output() {
        let cfg = MainRunConfig {
            steps: 30_000,
            burn_in: 5_000,
            block_instances: 20,
            in_block_target: 100,
            structure_steps: 30_000,
            zeta_n: 64,
            zeta_replicates: 5,
            ..Default::default()
        };
        let run = main_run(&cfg);
        assert_eq!(run.tail.steps, 25_000);
        assert_eq!(run.blocks.len(), 60);
        assert!(run.blocks.iter().all(|b| b.t0 > 5_000));
        assert_eq!(run.spacings.in_block.len(), 100);
        assert_eq!(run.zeta.len(), 5);
        assert_eq!(run.structure.steps, 30_000);
        assert_eq!(run.structure.total_violations(), 0, "{:?}", run.structure.violations);
        assert!(run.long_waves.iter().all(|w| w.l > 64.0 || w.censored));
    }
}
