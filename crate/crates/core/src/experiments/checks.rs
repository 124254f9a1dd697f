use serde::Serialize;

use crate::queue::{Observer, QueueConfiguration, WaveRecord};
use crate::representation::g_at;

/// Ranks compared against the previous step on every step.
const SHORT_PREFIX: usize = 64;
/// Ranks compared, and all materialised spacings swept, every `sweep_every` steps.
const LONG_PREFIX: usize = 4096;
/// Movers whose diagonal identity is checked on every step (plus the last mover).
const DIAGONAL_MOVERS: usize = 4;
/// Slack on the two spacing inequalities. Both are attained exactly by
/// discrete laws, and spacings are differences of rounded positions.
const SPACING_TOL: f64 = 1e-9;

/// First offending step of one structural property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub property: &'static str,
    pub t: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StructureReport {
    pub steps: u64,
    /// Individual comparisons made, all properties together.
    pub checks: u64,
    pub violations: Vec<Violation>,
    /// Violations per property, including those not stored in `violations`.
    pub counts: Vec<(&'static str, u64)>,
}

impl StructureReport {
    pub fn total_violations(&self) -> u64 {
        self.counts.iter().map(|c| c.1).sum()
    }
}

/// Exact per-step checks of the queue's structural properties:
/// `W ≥ 1`, head at 0, spacings at most `2c⁺`, boundary gap above `c⁻ + c⁺`
/// for `W ≥ 2`, unmoved customers keep their position, and the diagonal
/// identity `x + G(t, x) = s` for the customer `s` moved to `x` at step `t`.
#[derive(Debug, Clone)]
pub struct StructureChecker {
    until: u64,
    sweep_every: u64,
    c_minus: f64,
    c_plus: f64,
    short: Vec<f64>,
    long: Option<Vec<f64>>,
    report: StructureReport,
}

const PROPERTIES: [&str; 6] = ["wave_length", "head", "spacing_bound", "boundary_gap", "unmoved_tail", "diagonal"];

impl StructureChecker {
    pub fn new(until: u64, c_minus: f64, c_plus: f64) -> Self {
        Self {
            until,
            sweep_every: 10_000,
            c_minus,
            c_plus,
            short: Vec::new(),
            long: None,
            report: StructureReport { counts: PROPERTIES.iter().map(|p| (*p, 0)).collect(), ..Default::default() },
        }
    }

    pub fn with_sweep_every(mut self, every: u64) -> Self {
        assert!(every > 0);
        self.sweep_every = every;
        self
    }

    pub fn report(&self) -> &StructureReport {
        &self.report
    }

    pub fn into_report(self) -> StructureReport {
        self.report
    }

    fn check(&mut self, ok: bool, property: &'static str, t: u64, detail: impl FnOnce() -> String) {
        self.report.checks += 1;
        if ok {
            return;
        }
        let slot = self.report.counts.iter_mut().find(|c| c.0 == property).expect("known property");
        slot.1 += 1;
        if self.report.violations.len() < 32 {
            self.report.violations.push(Violation { property, t, detail: detail() });
        }
    }

    fn snapshot(config: &mut QueueConfiguration, n: usize) -> Vec<f64> {
        config.ensure_rank(n - 1);
        config.positions()[..n].to_vec()
    }

    /// New ranks `r ≥ W` must equal old ranks `r + 1` bit for bit.
    fn compare_tail(&mut self, prev: &[f64], rec: &WaveRecord, config: &mut QueueConfiguration) {
        for r in rec.w as usize..prev.len() - 1 {
            let (now, before) = (config.position(r), prev[r + 1]);
            self.check(now.to_bits() == before.to_bits(), "unmoved_tail", rec.t, || {
                format!("rank {r}: {now} != {before}")
            });
        }
    }
}

impl Observer for StructureChecker {
    fn on_start(&mut self, t: u64, config: &mut QueueConfiguration) {
        if t < self.until {
            self.short = Self::snapshot(config, SHORT_PREFIX);
            if self.sweep_every == 1 {
                self.long = Some(Self::snapshot(config, LONG_PREFIX));
            }
        }
    }

    fn on_step(&mut self, rec: &WaveRecord, config: &mut QueueConfiguration) {
        let t = rec.t;
        if t > self.until {
            return;
        }
        self.report.steps += 1;
        let w = rec.w as usize;
        self.check(rec.w >= 1, "wave_length", t, || format!("W = {}", rec.w));
        let head = config.position(0);
        self.check(head == 0.0, "head", t, || format!("head at {head}"));

        // Spacings touched by the wave: new ranks 1..W.
        let (c_minus, c_plus) = (self.c_minus, self.c_plus);
        let touched = if rec.censored { 0 } else { w };
        for i in 1..=touched {
            let s = config.spacing(i);
            self.check(s <= 2.0 * c_plus + SPACING_TOL, "spacing_bound", t, || format!("spacing {i} = {s}"));
        }
        if w >= 2 && !rec.censored {
            let gap = config.spacing(w);
            self.check(gap > c_minus + c_plus - SPACING_TOL, "boundary_gap", t, || format!("gap {gap} at rank {w}"));
        }

        // Snapshots are for this step only, even when a censored wave voids them.
        let prev = std::mem::take(&mut self.short);
        let long = self.long.take();
        if !rec.censored {
            self.compare_tail(&prev, rec, config);
            if let Some(long) = long {
                self.compare_tail(&long, rec, config);
            }
        }

        let movers = if rec.censored { 0 } else { w };
        let mut ranks: Vec<usize> = (0..movers.min(DIAGONAL_MOVERS)).collect();
        if movers > DIAGONAL_MOVERS {
            ranks.push(movers - 1);
        }
        for r in ranks {
            let x = config.position(r);
            let lhs = x + g_at(config, t, x);
            let s = (t + r as u64) as f64;
            self.check(lhs == s, "diagonal", t, || format!("rank {r}: x + G = {lhs}, s = {s}"));
        }

        if t.is_multiple_of(self.sweep_every) {
            let n = config.generated_len();
            let xs = config.positions();
            let mut bad = Vec::new();
            for i in 1..n {
                let s = xs[i] - xs[i - 1];
                if s > 2.0 * c_plus + SPACING_TOL {
                    bad.push((i, s));
                }
            }
            self.report.checks += n as u64 - 1;
            for (i, s) in bad {
                self.check(false, "spacing_bound", t, || format!("sweep: spacing {i} = {s}"));
            }
        }

        if t < self.until {
            self.short = Self::snapshot(config, SHORT_PREFIX);
            if (t + 1).is_multiple_of(self.sweep_every) {
                self.long = Some(Self::snapshot(config, LONG_PREFIX));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{Simulation, SpacingDistribution};
    use crate::SeedTree;

    #[test]
    fn clean_run_has_no_violations() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut sim = Simulation::seeded(d, &SeedTree::new(9), 0);
        let mut chk = StructureChecker::new(20_000, 0.5, 1.5).with_sweep_every(1000);
        sim.run(20_000, &mut [&mut chk]);
        let rep = chk.into_report();
        assert_eq!(rep.steps, 20_000);
        assert_eq!(rep.total_violations(), 0, "{:?}", rep.violations);
        assert!(rep.checks > 20_000 * 4);
    }

    #[test]
    fn a_wrong_bound_is_reported() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut sim = Simulation::seeded(d, &SeedTree::new(9), 0);
        // Pretending c⁺ is smaller makes real spacings exceed 2c⁺.
        let mut chk = StructureChecker::new(2_000, 0.5, 0.6);
        sim.run(2_000, &mut [&mut chk]);
        let rep = chk.into_report();
        assert!(rep.counts.iter().any(|c| c.0 == "spacing_bound" && c.1 > 0));
    }
}
