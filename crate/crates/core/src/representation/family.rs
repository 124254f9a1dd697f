use thiserror::Error;

use crate::queue::{Observer, QueueConfiguration, WaveRecord};

#[derive(Debug, Error, PartialEq)]
pub enum FamilyError {
    #[error("steps {need_lo}..={need_hi} are needed but only {have_lo}..={have_hi} were recorded; run to at least τ = {need_hi}")]
    InsufficientSteps { need_lo: i64, need_hi: i64, have_lo: u64, have_hi: u64 },
    #[error("positions [{need_lo}, {need_hi}] are needed but [{have_lo}, {have_hi}] were recorded")]
    InsufficientPositions { need_lo: f64, need_hi: f64, have_lo: f64, have_hi: f64 },
}

/// A run of consecutive graphs `G(t, ·)` that coincide on the recorded
/// position window.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub first_t: u64,
    pub last_t: u64,
    /// Number of customers strictly before the window at step `first_t`.
    count_below: usize,
    /// Customer positions inside the window at step `first_t`.
    jumps: Vec<f64>,
    /// Where this member joins the previous one (`None`: no earlier member,
    /// or a censored wave).
    pub joins_previous_at: Option<f64>,
}

impl Member {
    /// `G(first_t, x)` for `x` inside the window.
    pub fn g(&self, x: f64) -> f64 {
        let count = self.count_below + self.jumps.partition_point(|p| *p <= x);
        (self.first_t + count as u64) as f64 - 1.0 - x
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }
}

/// Records the distinct graphs of a step range on a position window.
#[derive(Debug, Clone)]
pub struct GraphRecorder {
    t_lo: u64,
    t_hi: u64,
    x_lo: f64,
    x_hi: f64,
    members: Vec<Member>,
    waves: Vec<WaveRecord>,
}

impl GraphRecorder {
    /// Covers steps `t_lo..=t_hi` (`t_lo ≥ 1`) and positions `[x_lo, x_hi]`.
    pub fn new(t_lo: u64, t_hi: u64, x_lo: f64, x_hi: f64) -> Self {
        assert!(t_lo >= 1 && t_lo <= t_hi && x_lo < x_hi);
        Self { t_lo, t_hi, x_lo, x_hi, members: Vec::new(), waves: Vec::new() }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn waves(&self) -> &[WaveRecord] {
        &self.waves
    }

    pub fn step_range(&self) -> (u64, u64) {
        (self.t_lo, self.t_hi)
    }

    pub fn is_complete(&self) -> bool {
        self.members.last().is_some_and(|m| m.last_t == self.t_hi)
    }

    fn snapshot(&self, t: u64, config: &mut QueueConfiguration, joins: Option<f64>) -> Member {
        config.ensure_beyond(self.x_hi);
        let p = config.positions();
        let lo = p.partition_point(|x| *x < self.x_lo);
        let hi = p.partition_point(|x| *x <= self.x_hi);
        Member { first_t: t, last_t: t, count_below: lo, jumps: p[lo..hi].to_vec(), joins_previous_at: joins }
    }
}

impl Observer for GraphRecorder {
    fn on_step(&mut self, record: &WaveRecord, config: &mut QueueConfiguration) {
        let t = record.t;
        if t < self.t_lo || t > self.t_hi {
            return;
        }
        if t > self.t_lo {
            self.waves.push(*record);
        }
        if t == self.t_lo || record.exceeds_position(self.x_lo) {
            let joins = (t > self.t_lo && !record.censored).then_some(record.l);
            let m = self.snapshot(t, config, joins);
            // Identical on the window despite a long wave: same member.
            if let Some(last) = self.members.last_mut() {
                if last.jumps == m.jumps && last.first_t + last.count_below as u64 == t + m.count_below as u64 {
                    last.last_t = t;
                    return;
                }
            }
            self.members.push(m);
        } else if let Some(last) = self.members.last_mut() {
            last.last_t = t;
        }
    }
}

/// Distinct members of the family `H(y, ·)` around one reference step.
#[derive(Debug, Clone)]
pub struct RescaledFamily {
    pub n: u64,
    pub t_ref: u64,
    pub sigma: f64,
    pub y_window: (f64, f64),
    pub t_max: f64,
    pub members: Vec<Member>,
}

impl RescaledFamily {
    /// Selects the members whose step ranges meet `t_ref + σ√n·y_window`.
    pub fn build(
        recorder: &GraphRecorder,
        n: u64,
        t_ref: u64,
        sigma: f64,
        y_window: (f64, f64),
        t_max: f64,
    ) -> Result<Self, FamilyError> {
        assert!(n >= 1 && t_max > 1.0 && y_window.0 < y_window.1);
        let scale = sigma * (n as f64).sqrt();
        let need_lo = t_ref as i64 + (scale * y_window.0).floor() as i64;
        let need_hi = t_ref as i64 + (scale * y_window.1).ceil() as i64;
        let (have_lo, have_hi) = recorder.step_range();
        let covered_hi = recorder.members.last().map_or(0, |m| m.last_t);
        if need_lo < have_lo as i64 || need_hi > covered_hi as i64 {
            return Err(FamilyError::InsufficientSteps { need_lo, need_hi, have_lo, have_hi });
        }
        let (x_lo, x_hi) = (n as f64, n as f64 * t_max);
        if x_lo < recorder.x_lo || x_hi > recorder.x_hi {
            return Err(FamilyError::InsufficientPositions {
                need_lo: x_lo,
                need_hi: x_hi,
                have_lo: recorder.x_lo,
                have_hi: recorder.x_hi,
            });
        }
        let members = recorder
            .members
            .iter()
            .filter(|m| (m.last_t as i64) >= need_lo && (m.first_t as i64) <= need_hi)
            .cloned()
            .collect();
        Ok(Self { n, t_ref, sigma, y_window, t_max, members })
    }

    fn root_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// `H(y, t)` of member `i` at rescaled time `t ∈ [1, t_max]`.
    pub fn h(&self, i: usize, t: f64) -> f64 {
        assert!((1.0..=self.t_max).contains(&t));
        (self.members[i].g(self.n as f64 * t) - self.t_ref as f64) / self.root_n()
    }

    /// Rescaled initial-value interval `[y₋, y₊]` of member `i`.
    pub fn y_interval(&self, i: usize) -> (f64, f64) {
        let s = self.sigma * self.root_n();
        let m = &self.members[i];
        (
            (m.first_t as f64 - self.t_ref as f64) / s,
            (m.last_t as f64 - self.t_ref as f64) / s,
        )
    }

    /// Rescaled time at which member `i` joins member `i − 1`; `None` when
    /// that happens after `t_max` (or is unknown).
    pub fn coalescence_time(&self, i: usize) -> Option<f64> {
        let x = self.members[i].joins_previous_at?;
        let t = x / self.n as f64;
        (t <= self.t_max).then_some(t)
    }

    /// `H(y, 2) − H(y, 1)` for every member.
    pub fn unit_increments(&self) -> Vec<f64> {
        (0..self.members.len()).map(|i| self.h(i, 2.0) - self.h(i, 1.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{RecordSink, Simulation, SpacingDistribution};
    use crate::representation::{g_at, CountingFunction, GGraph};
    use crate::seed::SeedTree;

    #[test]
    fn members_match_direct_graphs() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut sim = Simulation::seeded(d, &SeedTree::new(2), 0).with_horizon_cap(100_000);
        sim.run_collect(2000);
        let mut rec = GraphRecorder::new(2001, 2400, 16.0, 64.0);
        let mut sink = RecordSink::default();
        let mut graphs = Vec::new();
        for _ in 0..400 {
            let r = sim.step();
            rec.on_step(&r, sim.config_mut());
            sink.on_step(&r, sim.config_mut());
            let t = sim.t();
            graphs.push(GGraph::new(t, CountingFunction::from_config(sim.config_mut(), 64.0)));
            assert_eq!(g_at(sim.config_mut(), t, 30.5), graphs.last().unwrap().eval(30.5));
        }
        assert!(rec.is_complete());
        for m in rec.members() {
            for t in m.first_t..=m.last_t {
                let g = &graphs[(t - 2001) as usize];
                for x in [16.0, 17.25, 33.3, 64.0] {
                    assert_eq!(m.g(x), g.eval(x), "t = {t}, x = {x}");
                }
            }
        }
        // Every long wave starts a new member; the rest are absorbed.
        let long = sink.records.iter().skip(1).filter(|r| r.exceeds_position(16.0)).count();
        assert!(rec.members().len() <= long + 1);
        assert!(rec.members().len() >= 2);

        let fam = RescaledFamily::build(&rec, 16, 2200, 0.3, (-6.0, 6.0), 4.0).unwrap();
        assert!(!fam.members.is_empty());
        for i in 0..fam.members.len() {
            let (a, b) = fam.y_interval(i);
            assert!(a <= b);
            if i > 0 {
                // G(t, x) is nondecreasing in t, so members stay ordered.
                for tt in [1.0, 1.7, 4.0] {
                    assert!(fam.h(i - 1, tt) <= fam.h(i, tt));
                }
            }
        }
        assert!(RescaledFamily::build(&rec, 16, 2396, 0.3, (-6.0, 6.0), 4.0).is_err());
        assert!(RescaledFamily::build(&rec, 32, 2200, 0.3, (-6.0, 6.0), 4.0).is_err());
    }
}
