use super::config::QueueConfiguration;
use super::distribution::SpacingDistribution;
use super::{StoppingRule, WaveRecord};
use crate::seed::{SeedTree, SimRng, Stream};

pub const DEFAULT_HORIZON_CAP: usize = 1_000_000;

/// Receives every step of a run.
pub trait Observer {
    /// Called once before the first step.
    fn on_start(&mut self, _t: u64, _config: &mut QueueConfiguration) {}

    /// Called after each step with the new configuration.
    fn on_step(&mut self, record: &WaveRecord, config: &mut QueueConfiguration);
}

/// Collects the wave records of a run.
#[derive(Debug, Default, Clone)]
pub struct RecordSink {
    pub records: Vec<WaveRecord>,
}

impl Observer for RecordSink {
    fn on_step(&mut self, record: &WaveRecord, _config: &mut QueueConfiguration) {
        self.records.push(*record);
    }
}

/// A configuration together with the step randomness and the clock.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: QueueConfiguration,
    dist: SpacingDistribution,
    rng: SimRng,
    t: u64,
    horizon_cap: usize,
    rule: StoppingRule,
}

impl Simulation {
    pub fn new(config: QueueConfiguration, rng: SimRng) -> Self {
        let dist = config.distribution().clone();
        Self {
            config,
            dist,
            rng,
            t: 0,
            horizon_cap: DEFAULT_HORIZON_CAP,
            rule: StoppingRule::default(),
        }
    }

    /// I.i.d. start with step and tail streams taken from `seeds`, replicate `replicate`.
    pub fn seeded(dist: SpacingDistribution, seeds: &SeedTree, replicate: u64) -> Self {
        let config = QueueConfiguration::iid(dist, seeds.rng(Stream::Tail, replicate));
        Self::new(config, seeds.rng(Stream::Steps, replicate))
    }

    pub fn with_horizon_cap(mut self, cap: usize) -> Self {
        assert!(cap >= 1, "horizon cap must be at least 1");
        self.horizon_cap = cap;
        self
    }

    pub fn with_rule(mut self, rule: StoppingRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn horizon_cap(&self) -> usize {
        self.horizon_cap
    }

    pub fn rule(&self) -> StoppingRule {
        self.rule
    }

    pub fn distribution(&self) -> &SpacingDistribution {
        &self.dist
    }

    pub fn config(&self) -> &QueueConfiguration {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut QueueConfiguration {
        &mut self.config
    }

    pub fn step(&mut self) -> WaveRecord {
        self.t += 1;
        let (dist, rng) = (&self.dist, &mut self.rng);
        self.config
            .advance(self.t, self.horizon_cap, self.rule, || dist.sample(rng))
    }

    /// Applies `steps` steps, reporting each to every observer.
    pub fn run(&mut self, steps: u64, observers: &mut [&mut dyn Observer]) {
        for o in observers.iter_mut() {
            o.on_start(self.t, &mut self.config);
        }
        for _ in 0..steps {
            let record = self.step();
            for o in observers.iter_mut() {
                o.on_step(&record, &mut self.config);
            }
        }
    }

    pub fn run_collect(&mut self, steps: u64) -> Vec<WaveRecord> {
        (0..steps).map(|_| self.step()).collect()
    }
}

impl Iterator for Simulation {
    type Item = WaveRecord;

    fn next(&mut self) -> Option<WaveRecord> {
        Some(self.step())
    }
}
