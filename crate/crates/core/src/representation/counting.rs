use serde::Serialize;

use crate::queue::QueueConfiguration;

/// `F(x) = max{k : x_k ≤ x} − x` on `[0, x_max]`, stored as its jump list.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingFunction {
    /// Jump positions `x_0 = 0 < x_1 < …`, all at most `x_max`.
    jumps: Vec<f64>,
    x_max: f64,
}

impl CountingFunction {
    /// Reads the configuration up to `x_max`, extending its tail as needed.
    pub fn from_config(config: &mut QueueConfiguration, x_max: f64) -> Self {
        let n = config.count_at_or_below(x_max);
        Self { jumps: config.positions()[..n].to_vec(), x_max }
    }

    pub fn from_positions(jumps: Vec<f64>, x_max: f64) -> Self {
        debug_assert!(jumps.first() == Some(&0.0));
        debug_assert!(jumps.windows(2).all(|w| w[0] < w[1]));
        let keep = jumps.partition_point(|x| *x <= x_max);
        let mut jumps = jumps;
        jumps.truncate(keep);
        Self { jumps, x_max }
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// `#{k : x_k ≤ x}`.
    pub fn count(&self, x: f64) -> usize {
        assert!(x <= self.x_max, "evaluation at {x} outside window {}", self.x_max);
        self.jumps.partition_point(|p| *p <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.count(x) as f64 - 1.0 - x
    }
}

/// One graph `G(t, x) = t + F_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GGraph {
    pub t: u64,
    pub f: CountingFunction,
}

impl GGraph {
    pub fn new(t: u64, f: CountingFunction) -> Self {
        Self { t, f }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.t as f64 + self.f.eval(x)
    }

    /// Integer part `t + k` of the value just after the jump at `x_k`.
    fn level(&self, k: usize) -> u64 {
        self.t + k as u64
    }
}

/// Value of `G(t, x)` for the configuration at step `t`.
pub fn g_at(config: &mut QueueConfiguration, t: u64, x: f64) -> f64 {
    let k = config.count_at_or_below(x);
    (t + k as u64) as f64 - 1.0 - x
}

/// Positions before the last step, up to `x_max`, rebuilt from the journal.
///
/// `None` if the journal is off, or if the wave was censored and `x_max`
/// lies beyond the furthest position it reached (the rest was discarded).
pub fn previous_positions(config: &mut QueueConfiguration, w: u64, censored: bool, x_max: f64) -> Option<Vec<f64>> {
    let journal = config.journal()?.to_vec();
    debug_assert_eq!(journal.len() as u64, w + 1);
    if censored && journal.last().is_some_and(|l| *l < x_max) {
        return None;
    }
    let mut out = Vec::with_capacity(journal.len() + 1);
    out.push(0.0);
    out.extend(journal.iter().copied().take_while(|x| *x <= x_max));
    if out.len() == journal.len() + 1 && !censored {
        // Previous ranks beyond W + 1 are the current ranks beyond W.
        config.ensure_beyond(x_max);
        let rest = &config.positions()[w as usize + 1..];
        out.extend(rest.iter().copied().take_while(|x| *x <= x_max));
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Coalescence {
    At(f64),
    /// The graphs do not agree anywhere at the right end of the common window.
    BeyondWindow,
}

/// Least `x*` from which the two graphs make the same jumps with the same
/// values up to the end of the common window.
///
/// The comparison is exact: a jump is shared when its position is bit-equal
/// and the integer levels `t + k` agree.
pub fn coalescence_position(prev: &GGraph, curr: &GGraph) -> Coalescence {
    let x_max = prev.f.x_max.min(curr.f.x_max);
    let a = &prev.f.jumps[..prev.f.jumps.partition_point(|x| *x <= x_max)];
    let b = &curr.f.jumps[..curr.f.jumps.partition_point(|x| *x <= x_max)];
    let (mut i, mut j) = (a.len(), b.len());
    let mut start = None;
    while i > 0 && j > 0 {
        let (ka, kb) = (i - 1, j - 1);
        if a[ka] != b[kb] || prev.level(ka) != curr.level(kb) {
            break;
        }
        start = Some(a[ka]);
        i -= 1;
        j -= 1;
    }
    match start {
        Some(x) => Coalescence::At(x),
        None => Coalescence::BeyondWindow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{SpacingDistribution, StoppingRule, TailLaw};
    use crate::seed::{SeedTree, Stream};

    fn lattice_cfg() -> QueueConfiguration {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        QueueConfiguration::lattice(1.0, d, SeedTree::new(0).rng(Stream::Tail, 0)).unwrap()
    }

    #[test]
    fn integer_lattice_values() {
        let mut c = lattice_cfg();
        let f = CountingFunction::from_config(&mut c, 10.0);
        assert_eq!(f.eval(2.5), -0.5);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(3.0), 0.0);
        assert_eq!(f.jumps().len(), 11);
        assert_eq!(g_at(&mut c, 7, 2.5), 6.5);
    }

    #[test]
    fn single_mover_step_coalesces_at_wave_end() {
        let mut c = lattice_cfg();
        let prev = GGraph::new(0, CountingFunction::from_config(&mut c, 20.0));
        let rec = c.advance(1, 100, StoppingRule::OwnPosition, || 0.5);
        assert_eq!((rec.w, rec.l), (1, 2.0));
        let curr = GGraph::new(1, CountingFunction::from_config(&mut c, 20.0));
        assert_eq!(coalescence_position(&prev, &curr), Coalescence::At(2.0));
        // Agreement beyond the coalescence point, disagreement just before it.
        for x in [2.0, 2.3, 7.9, 20.0] {
            assert_eq!(prev.eval(x), curr.eval(x));
        }
        assert_ne!(prev.eval(0.5), curr.eval(0.5));
    }

    #[test]
    fn disjoint_windows_do_not_coalesce() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let rng = SeedTree::new(0).rng(Stream::Tail, 0);
        let mut a = QueueConfiguration::from_positions(&[0.0, 1.0, 2.0], TailLaw::Lattice(1.0), d.clone(), rng.clone()).unwrap();
        let mut b = QueueConfiguration::from_positions(&[0.0, 0.7, 1.9], TailLaw::Lattice(1.1), d, rng).unwrap();
        let ga = GGraph::new(0, CountingFunction::from_config(&mut a, 6.0));
        let gb = GGraph::new(1, CountingFunction::from_config(&mut b, 6.0));
        assert_eq!(coalescence_position(&ga, &gb), Coalescence::BeyondWindow);
    }
}
