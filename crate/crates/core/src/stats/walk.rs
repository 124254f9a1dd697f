use rand::Rng;
use serde::Serialize;

use crate::queue::SpacingDistribution;

/// Slack for `≤ y` comparisons on enumerated walks, whose values are sums of atoms.
const ENUM_SLACK: f64 = 1e-12;
/// Largest number of enumerated increment paths.
const ENUM_LIMIT: usize = 1 << 12;

/// Estimate of `q(j, y) = Pr(max_{k ≤ j} S^sym_k ≤ y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QEstimate {
    pub j: u64,
    pub y: f64,
    pub q_hat: f64,
    pub se: f64,
    pub replicates: u64,
    /// Computed without sampling error.
    pub exact: bool,
}

impl QEstimate {
    fn exact(j: u64, y: f64, q: f64) -> Self {
        Self { j, y, q_hat: q, se: 0.0, replicates: 0, exact: true }
    }

    fn from_count(j: u64, y: f64, hits: u64, reps: u64) -> Self {
        let q = hits as f64 / reps as f64;
        Self { j, y, q_hat: q, se: (q * (1.0 - q) / reps as f64).sqrt(), replicates: reps, exact: false }
    }
}

/// Law of `ξ′ − ξ″` for a discrete spacing law, with equal values merged.
fn symmetric_increments(atoms: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(a, pa) in atoms {
        for &(b, pb) in atoms {
            let v = a - b;
            match out.iter_mut().find(|(w, _)| (w - v).abs() < ENUM_SLACK) {
                Some(slot) => slot.1 += pa * pb,
                None => out.push((v, pa * pb)),
            }
        }
    }
    out
}

/// Probability that the walk with increments `steps[i] ∈ law_i` stays at or below `y`.
fn enumerate_max(laws: &[Vec<(f64, f64)>], y: f64) -> f64 {
    fn go(laws: &[Vec<(f64, f64)>], s: f64, y: f64) -> f64 {
        match laws.split_first() {
            None => 1.0,
            Some((law, rest)) => law
                .iter()
                .filter(|(v, _)| s + v <= y + ENUM_SLACK)
                .map(|(v, p)| p * go(rest, s + v, y))
                .sum(),
        }
    }
    go(laws, 0.0, y)
}

fn trivial_q(j: u64, y: f64, dist: &SpacingDistribution) -> Option<f64> {
    let range = dist.c_plus() - dist.c_minus();
    if j == 0 || y >= j as f64 * range {
        Some(1.0)
    } else if y < -range {
        Some(0.0)
    } else {
        None
    }
}

/// Exact `q(j, y)` for a discrete law when the enumeration is small enough.
pub fn q_exact(j: u64, y: f64, dist: &SpacingDistribution) -> Option<QEstimate> {
    if let Some(q) = trivial_q(j, y, dist) {
        return Some(QEstimate::exact(j, y, q));
    }
    let inc = symmetric_increments(&dist.atoms()?);
    let paths = (inc.len() as f64).powi(j as i32);
    if paths > ENUM_LIMIT as f64 {
        return None;
    }
    let laws = vec![inc; j as usize];
    Some(QEstimate::exact(j, y, enumerate_max(&laws, y)))
}

/// `q(j, y)`: exact when trivial or enumerable, Monte Carlo otherwise.
pub fn q_mc<R: Rng + ?Sized>(
    j: u64,
    y: f64,
    dist: &SpacingDistribution,
    replicates: u64,
    rng: &mut R,
) -> QEstimate {
    if let Some(e) = q_exact(j, y, dist) {
        return e;
    }
    assert!(replicates >= 1);
    let mut hits = 0;
    for _ in 0..replicates {
        let mut s = 0.0;
        let mut ok = true;
        for _ in 0..j {
            s += dist.sample(rng) - dist.sample(rng);
            if s > y {
                ok = false;
                break;
            }
        }
        hits += ok as u64;
    }
    QEstimate::from_count(j, y, hits, replicates)
}

/// Monte Carlo `q(j, y)` on a grid, with all cells read off the same walks.
///
/// Sharing the walks makes the grid exactly monotone in both `j` and `y`.
pub fn q_grid<R: Rng + ?Sized>(
    js: &[u64],
    ys: &[f64],
    dist: &SpacingDistribution,
    replicates: u64,
    rng: &mut R,
) -> Vec<QEstimate> {
    assert!(replicates >= 1);
    let mut jsorted = js.to_vec();
    jsorted.sort_unstable();
    let jmax = jsorted.last().copied().unwrap_or(0);
    let mut hits = vec![0u64; js.len() * ys.len()];
    let mut maxima = vec![0.0f64; jsorted.len()];
    for _ in 0..replicates {
        let (mut s, mut m) = (0.0f64, f64::NEG_INFINITY);
        let mut next = 0;
        while next < jsorted.len() && jsorted[next] == 0 {
            maxima[next] = f64::NEG_INFINITY;
            next += 1;
        }
        for k in 1..=jmax {
            s += dist.sample(rng) - dist.sample(rng);
            m = m.max(s);
            while next < jsorted.len() && jsorted[next] == k {
                maxima[next] = m;
                next += 1;
            }
        }
        for (a, &j) in js.iter().enumerate() {
            let mj = maxima[jsorted.binary_search(&j).unwrap()];
            for (b, &y) in ys.iter().enumerate() {
                hits[a * ys.len() + b] += (mj <= y) as u64;
            }
        }
    }
    let mut out = Vec::with_capacity(hits.len());
    for (a, &j) in js.iter().enumerate() {
        for (b, &y) in ys.iter().enumerate() {
            out.push(QEstimate::from_count(j, y, hits[a * ys.len() + b], replicates));
        }
    }
    out
}

/// `q_{j,y}(x) = Pr(max_k Σ_{i ≤ k} (ξ′_i − x_i) ≤ y)` with `x` fixed.
pub fn q_given<R: Rng + ?Sized>(
    y: f64,
    x: &[f64],
    dist: &SpacingDistribution,
    replicates: u64,
    rng: &mut R,
) -> QEstimate {
    let j = x.len() as u64;
    if j == 1 {
        return QEstimate::exact(1, y, dist.cdf(x[0] + y));
    }
    if let Some(atoms) = dist.atoms() {
        if (atoms.len() as f64).powi(j as i32) <= ENUM_LIMIT as f64 {
            let laws: Vec<Vec<(f64, f64)>> =
                x.iter().map(|xi| atoms.iter().map(|&(v, p)| (v - xi, p)).collect()).collect();
            return QEstimate::exact(j, y, enumerate_max(&laws, y));
        }
    }
    let prefix = prefix_sums(x);
    let hits = (0..replicates).filter(|_| walk_stays_below(&prefix, y, dist, rng)).count() as u64;
    QEstimate::from_count(j, y, hits, replicates)
}

fn prefix_sums(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

#[inline]
fn walk_stays_below<R: Rng + ?Sized>(prefix: &[f64], y: f64, dist: &SpacingDistribution, rng: &mut R) -> bool {
    let mut s = 0.0;
    for &p in prefix {
        s += dist.sample(rng);
        if s - p > y {
            return false;
        }
    }
    true
}

/// Fraction of i.i.d. spacing sequences that are not `(j, y)`-good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessEstimate {
    pub j: u64,
    pub y: f64,
    pub q_ref: f64,
    pub not_good: f64,
    pub se: f64,
    pub samples: u64,
}

impl GoodnessEstimate {
    pub fn within_bound(&self) -> bool {
        self.not_good <= 0.5 + 3.0 * self.se
    }
}

/// Monte Carlo not-good rate: a sequence `x ~ μ^j` is not good when
/// `q_{j,y}(x) > 2 q_ref`.
///
/// Each inner probability is estimated sequentially in batches, stopping as
/// soon as it is more than four standard errors from the threshold, or after
/// `max_inner` walks.
pub fn goodness_rate<R: Rng + ?Sized>(
    j: u64,
    y: f64,
    dist: &SpacingDistribution,
    q_ref: f64,
    samples: u64,
    max_inner: u64,
    rng: &mut R,
) -> GoodnessEstimate {
    assert!(samples >= 1 && j >= 1);
    let threshold = 2.0 * q_ref;
    if threshold >= 1.0 {
        return GoodnessEstimate { j, y, q_ref, not_good: 0.0, se: 0.0, samples };
    }
    const BATCH: u64 = 64;
    let mut bad = 0u64;
    let mut x = vec![0.0; j as usize];
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = dist.sample(rng);
        }
        let prefix = prefix_sums(&x);
        let (mut hits, mut n) = (0u64, 0u64);
        loop {
            for _ in 0..BATCH {
                hits += walk_stays_below(&prefix, y, dist, rng) as u64;
            }
            n += BATCH;
            let p = hits as f64 / n as f64;
            let se = (p.max(1.0 / n as f64) * (1.0 - p).max(1.0 / n as f64) / n as f64).sqrt();
            if (p - threshold).abs() > 4.0 * se || n >= max_inner {
                bad += (p > threshold) as u64;
                break;
            }
        }
    }
    let r = bad as f64 / samples as f64;
    GoodnessEstimate { j, y, q_ref, not_good: r, se: (r * (1.0 - r) / samples as f64).sqrt(), samples }
}

/// Exact not-good rate for a discrete law and short sequences.
pub fn goodness_rate_exact(j: u64, y: f64, dist: &SpacingDistribution) -> Option<GoodnessEstimate> {
    let atoms = dist.atoms()?;
    if (atoms.len() as f64).powi(2 * j as i32) > (ENUM_LIMIT * ENUM_LIMIT) as f64 {
        return None;
    }
    let q = q_exact(j, y, dist)?.q_hat;
    let mut rate = 0.0;
    let mut idx = vec![0usize; j as usize];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| atoms[i].0).collect();
        let p: f64 = idx.iter().map(|&i| atoms[i].1).product();
        let laws: Vec<Vec<(f64, f64)>> =
            x.iter().map(|xi| atoms.iter().map(|&(v, pv)| (v - xi, pv)).collect()).collect();
        if enumerate_max(&laws, y) > 2.0 * q + ENUM_SLACK {
            rate += p;
        }
        // Odometer over the atom indices.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Some(GoodnessEstimate { j, y, q_ref: q, not_good: rate, se: 0.0, samples: 0 });
            }
            idx[k] += 1;
            if idx[k] < atoms.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One cell of the walk-maximum envelope `(q(j,y) − q(j,y_floor))·√j / y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub j: u64,
    pub y: f64,
    pub q: f64,
    pub q_floor: f64,
    pub value: f64,
    pub se: f64,
}

pub fn envelope<R: Rng + ?Sized>(
    js: &[u64],
    ys: &[f64],
    y_floor: f64,
    dist: &SpacingDistribution,
    replicates: u64,
    rng: &mut R,
) -> Vec<EnvelopeRow> {
    let mut all_y = ys.to_vec();
    all_y.push(y_floor);
    let grid = q_grid(js, &all_y, dist, replicates, rng);
    let w = all_y.len();
    let mut rows = Vec::new();
    for (a, &j) in js.iter().enumerate() {
        let floor = grid[a * w + ys.len()];
        for (b, &y) in ys.iter().enumerate() {
            let q = grid[a * w + b];
            let scale = (j as f64).sqrt() / y;
            // Both cells come from the same walks, so the difference is a
            // frequency of {y_floor < max ≤ y}.
            let diff = q.q_hat - floor.q_hat;
            let se = (diff * (1.0 - diff) / replicates as f64).sqrt() * scale;
            rows.push(EnvelopeRow { j, y, q: q.q_hat, q_floor: floor.q_hat, value: diff * scale, se });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{SeedTree, Stream};

    fn two_point() -> SpacingDistribution {
        SpacingDistribution::two_point(0.5, 1.5).unwrap()
    }

    #[test]
    fn exact_small_cases() {
        let d = two_point();
        assert_eq!(q_exact(1, 1.0, &d).unwrap().q_hat, 1.0);
        assert_eq!(q_exact(1, 0.5, &d).unwrap().q_hat, 0.75);
        // j = 2, y = 0: S₁ ≤ 0 and S₂ ≤ 0. Paths: (−1,·) 1/4 all fine;
        // (0, −1 or 0) 1/2·3/4. Total 1/4 + 3/8.
        assert!((q_exact(2, 0.0, &d).unwrap().q_hat - 0.625).abs() < 1e-15);
    }

    #[test]
    fn trivial_bounds() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut rng = SeedTree::new(0).rng(Stream::Analysis, 0);
        let q = q_mc(10, 10.0, &d, 1, &mut rng);
        assert!(q.exact && q.q_hat == 1.0);
        let q = q_mc(10, -1.01, &d, 1, &mut rng);
        assert!(q.exact && q.q_hat == 0.0);
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let d = two_point();
        let exact = q_exact(6, 1.0, &d).unwrap().q_hat;
        let mut rng = SeedTree::new(1).rng(Stream::Analysis, 0);
        let mc = &q_grid(&[6], &[1.0], &d, 200_000, &mut rng)[0];
        assert!((mc.q_hat - exact).abs() < 4.0 * mc.se, "{} vs {exact}", mc.q_hat);
    }

    #[test]
    fn single_step_given_is_closed_form() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut rng = SeedTree::new(2).rng(Stream::Analysis, 0);
        let q = q_given(0.2, &[0.9], &d, 1, &mut rng);
        assert!(q.exact);
        assert!((q.q_hat - 0.6).abs() < 1e-15);
    }

    #[test]
    fn goodness_exact_j1() {
        // q(1, 0.5) = 3/4, so 2q > 1 and every sequence is good.
        let g = goodness_rate_exact(1, 0.5, &two_point()).unwrap();
        assert_eq!(g.not_good, 0.0);
        // y = −1: q = 1/4; q_given(x = 0.5) = Pr(ξ′ ≤ −0.5) = 0, q_given(1.5) = 1/2 ≤ 1/2.
        let g = goodness_rate_exact(1, -1.0, &two_point()).unwrap();
        assert_eq!(g.not_good, 0.0);
        // y = 0: q = 3/4 as well.
        let g = goodness_rate_exact(3, 0.0, &two_point()).unwrap();
        assert!(g.not_good <= 0.5);
    }
}
