use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CbmError {
    #[error("time step {dt} does not divide the interval {span}")]
    NotDivisible { dt: f64, span: f64 },
    #[error("target time {target} is before the current time {now}")]
    Backwards { target: f64, now: f64 },
    #[error("density ladder is not monotone beyond noise: {0}")]
    NonMonotone(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Increment {
    #[default]
    Gaussian,
    /// `±√Δ` with equal probability.
    Rademacher,
}

/// Coalescing particles started from a finite set of points.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    starts: Vec<f64>,
    /// Cluster positions, strictly increasing.
    pos: Vec<f64>,
    /// Start index of the lowest member of each cluster.
    rep: Vec<usize>,
    /// Union-find over start indices; roots are cluster representatives.
    parent: Vec<usize>,
    t: f64,
    steps: u64,
    dt: f64,
    increment: Increment,
    bridge: bool,
}

impl ParticleSystem {
    /// Particles at `starts`; coincident starts form one cluster at time 0.
    pub fn new(mut starts: Vec<f64>, dt: f64, increment: Increment) -> Self {
        assert!(dt > 0.0);
        starts.sort_by(f64::total_cmp);
        let mut parent: Vec<usize> = (0..starts.len()).collect();
        let (mut pos, mut rep) = (Vec::new(), Vec::new());
        for (i, &x) in starts.iter().enumerate() {
            if pos.last() == Some(&x) {
                parent[i] = *rep.last().unwrap();
            } else {
                pos.push(x);
                rep.push(i);
            }
        }
        // The bridge correction is a Brownian quantity; ±√Δ walks merge on crossing only.
        let bridge = increment == Increment::Gaussian;
        Self { starts, pos, rep, parent, t: 0.0, steps: 0, dt, increment, bridge }
    }

    /// Regular grid `lo, lo + ε, …` up to `hi`.
    pub fn grid(lo: f64, hi: f64, eps: f64, dt: f64, increment: Increment) -> Self {
        assert!(eps > 0.0 && hi >= lo);
        let n = ((hi - lo) / eps).floor() as usize + 1;
        Self::new((0..n).map(|i| lo + i as f64 * eps).collect(), dt, increment)
    }

    /// Disables the within-step meeting correction (crossings still merge).
    pub fn without_bridge(mut self) -> Self {
        self.bridge = false;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn clusters(&self) -> &[f64] {
        &self.pos
    }

    pub fn cluster_count(&self) -> usize {
        self.pos.len()
    }

    /// Representative start index of the cluster containing start `i`.
    pub fn cluster_of(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = i;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let sd = self.dt.sqrt();
        let n = self.pos.len();
        let mut new_pos = Vec::with_capacity(n);
        let mut new_rep = Vec::with_capacity(n);
        // Previous position of the current stack top, for the bridge test.
        let mut top_old = f64::NAN;
        for k in 0..n {
            let old = self.pos[k];
            let dx = match self.increment {
                Increment::Gaussian => sd * rng.sample::<f64, _>(StandardNormal),
                Increment::Rademacher => {
                    if rng.random::<bool>() {
                        sd
                    } else {
                        -sd
                    }
                }
            };
            let x = old + dx;
            if let Some(&top) = new_pos.last() {
                let crossed = x <= top;
                let touched = !crossed && self.bridge && {
                    let (d0, d1) = (old - top_old, x - top);
                    rng.random::<f64>() < (-d0 * d1 / self.dt).exp()
                };
                if crossed || touched {
                    let root = *new_rep.last().unwrap();
                    self.parent[self.rep[k]] = root;
                    continue;
                }
            }
            new_pos.push(x);
            new_rep.push(self.rep[k]);
            top_old = old;
        }
        self.pos = new_pos;
        self.rep = new_rep;
        self.steps += 1;
        self.t = self.steps as f64 * self.dt;
    }

    /// Advances to `t_target`, which must be a whole number of steps away.
    pub fn evolve<R: Rng + ?Sized>(&mut self, t_target: f64, rng: &mut R) -> Result<(), CbmError> {
        let span = t_target - self.t;
        if span < -1e-12 {
            return Err(CbmError::Backwards { target: t_target, now: self.t });
        }
        let k = (span / self.dt).round();
        if (k * self.dt - span).abs() > 1e-9 * t_target.abs().max(1.0) {
            return Err(CbmError::NotDivisible { dt: self.dt, span });
        }
        for _ in 0..k as u64 {
            self.step(rng);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{SeedTree, Stream};

    #[test]
    fn coincident_starts_merge_at_once() {
        let s = ParticleSystem::new(vec![0.3, 0.3, 1.0], 1e-4, Increment::Gaussian);
        assert_eq!(s.cluster_count(), 2);
    }

    #[test]
    fn order_and_partition_are_preserved() {
        let mut rng = SeedTree::new(3).rng(Stream::Particles, 0);
        let mut s = ParticleSystem::grid(0.0, 5.0, 0.05, 1e-3, Increment::Gaussian);
        let mut last = s.cluster_count();
        for _ in 0..500 {
            s.step(&mut rng);
            assert!(s.clusters().windows(2).all(|w| w[0] < w[1]));
            assert!(s.cluster_count() <= last);
            last = s.cluster_count();
        }
        // Clusters are intervals of starts: representatives are nondecreasing.
        let reps: Vec<usize> = (0..s.starts().len()).map(|i| s.cluster_of(i)).collect();
        assert!(reps.windows(2).all(|w| w[0] <= w[1]));
        let distinct = {
            let mut r = reps.clone();
            r.dedup();
            r.len()
        };
        assert_eq!(distinct, s.cluster_count());
    }

    #[test]
    fn single_particle_is_a_random_walk() {
        let mut rng = SeedTree::new(4).rng(Stream::Particles, 0);
        let mut end = Vec::new();
        for _ in 0..4000 {
            let mut s = ParticleSystem::new(vec![0.0], 0.01, Increment::Rademacher);
            s.evolve(1.0, &mut rng).unwrap();
            assert_eq!(s.cluster_count(), 1);
            end.push(s.clusters()[0]);
        }
        let (m, se) = crate::stats::mean_se(&end);
        assert!(m.abs() < 4.0 * se);
        let var = end.iter().map(|x| x * x).sum::<f64>() / end.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn evolve_rejects_fractional_steps() {
        let mut rng = SeedTree::new(4).rng(Stream::Particles, 0);
        let mut s = ParticleSystem::new(vec![0.0, 1.0], 0.3, Increment::Gaussian);
        assert!(matches!(s.evolve(1.0, &mut rng), Err(CbmError::NotDivisible { .. })));
        assert!(s.evolve(0.9, &mut rng).is_ok());
        assert!(matches!(s.evolve(0.3, &mut rng), Err(CbmError::Backwards { .. })));
    }
}
