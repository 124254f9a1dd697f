use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::queue::{BlockDecomposition, QueueConfiguration, SpacingDistribution};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockStatError {
    #[error("block flag of spacing {0} is unknown (history window too short)")]
    UnknownFlag(usize),
    #[error("decomposition covers ranks up to {have}, need {need}")]
    TooShort { have: usize, need: usize },
}

/// Queue position of rank `k` against the reconstructed i.i.d. sum `S_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockWalkComparison {
    pub t0: u64,
    pub k: usize,
    pub x_k: f64,
    pub s_k: f64,
    /// Number of spacings `1..=k` whose endpoints are not in the same block.
    pub bad_count: usize,
    /// `(c⁺ − c⁻)·bad_count`.
    pub bound: f64,
    /// Largest single discrepancy `|ξ*_i − (x_i − x_{i−1})|` over the bad spacings.
    pub max_bad_term: f64,
}

impl BlockWalkComparison {
    pub fn gap(&self) -> f64 {
        (self.x_k - self.s_k).abs()
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.gap() <= self.bound + tol
    }
}

/// Builds `ξ*_i` for `i = 1..=k`: the actual spacing inside a block, a fresh
/// draw from `dist` across a block boundary.
pub fn block_walk_compare<R: Rng + ?Sized>(
    config: &mut QueueConfiguration,
    blocks: &BlockDecomposition,
    k: usize,
    dist: &SpacingDistribution,
    rng: &mut R,
) -> Result<BlockWalkComparison, BlockStatError> {
    if blocks.same_block.len() < k {
        return Err(BlockStatError::TooShort { have: blocks.same_block.len(), need: k });
    }
    let (mut s_k, mut bad, mut max_bad) = (0.0, 0usize, 0.0f64);
    for i in 1..=k {
        let actual = config.spacing(i);
        match blocks.spacing_in_block(i) {
            Some(true) => s_k += actual,
            Some(false) => {
                let xi = dist.sample(rng);
                s_k += xi;
                bad += 1;
                max_bad = max_bad.max((xi - actual).abs());
            }
            None => return Err(BlockStatError::UnknownFlag(i)),
        }
    }
    Ok(BlockWalkComparison {
        t0: blocks.t0,
        k,
        x_k: config.position(k),
        s_k,
        bad_count: bad,
        bound: (dist.c_plus() - dist.c_minus()) * bad as f64,
        max_bad_term: max_bad,
    })
}

/// Spacings `1..=k` split by their block flag; unknown flags are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpacingSplit {
    pub in_block: Vec<f64>,
    pub boundary: Vec<f64>,
    pub unknown: usize,
}

pub fn split_spacings(config: &mut QueueConfiguration, blocks: &BlockDecomposition, ranks: &[usize]) -> SpacingSplit {
    let mut out = SpacingSplit::default();
    for &i in ranks {
        assert!(i >= 1 && i <= blocks.same_block.len(), "spacing index {i} outside decomposition");
        let v = config.spacing(i);
        match blocks.spacing_in_block(i) {
            Some(true) => out.in_block.push(v),
            Some(false) => out.boundary.push(v),
            None => out.unknown += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{StoppingRule, TailLaw};
    use crate::seed::{SeedTree, Stream};

    #[test]
    fn all_in_block_reproduces_the_position() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let mut rng = SeedTree::new(0).rng(Stream::Tail, 0);
        let mut c = QueueConfiguration::from_positions(
            &[0.0, 1.4, 2.8, 4.0, 4.9, 6.0],
            TailLaw::Lattice(1.0),
            d.clone(),
            rng.clone(),
        )
        .unwrap();
        let mut it = [0.9, 1.2, 1.3].into_iter();
        c.advance(1, 100, StoppingRule::OwnPosition, || it.next().unwrap());
        let b = BlockDecomposition::at(&mut c, 1, 4, 0).unwrap();
        let cmp = block_walk_compare(&mut c, &b, 2, &d, &mut rng).unwrap();
        assert_eq!(cmp.bad_count, 0);
        assert_eq!(cmp.gap(), 0.0);
        let cmp = block_walk_compare(&mut c, &b, 4, &d, &mut rng).unwrap();
        assert_eq!(cmp.bad_count, 2);
        assert_eq!(cmp.bound, 2.0);
        let split = split_spacings(&mut c, &b, &[1, 2, 3, 4]);
        assert_eq!(split.in_block.len(), 2);
        assert!((split.boundary[0] - 2.8).abs() < 1e-12);
    }
}
