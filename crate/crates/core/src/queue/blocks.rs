use thiserror::Error;

use super::config::QueueConfiguration;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockError {
    #[error("window start {window_start} is after the evaluation step {t0}")]
    WindowAfterEvaluation { window_start: u64, t0: u64 },
    #[error("configuration last moved at step {last} but evaluated at {t0}")]
    StaleEvaluation { last: u64, t0: u64 },
}

/// Last-move structure of ranks `0..=k` at step `t0`.
///
/// `since_move[r]` is `L(t0)` for the customer at rank `r`: steps since its
/// last move, `t0` if it never moved. It is `None` when the last move predates
/// `window_start` and so is not known exactly. `same_block[r]` is the flag for
/// the pair `(r, r + 1)`: both moved, and last did so in the same wave.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub t0: u64,
    pub window_start: u64,
    pub since_move: Vec<Option<u64>>,
    pub same_block: Vec<Option<bool>>,
}

impl BlockDecomposition {
    /// Reads the decomposition off the configuration at its current step `t0`.
    ///
    /// With `window_start = 0` the whole history since the start of the run is
    /// known, and customers that never moved have `L = t0`.
    pub fn at(
        config: &mut QueueConfiguration,
        t0: u64,
        k: usize,
        window_start: u64,
    ) -> Result<Self, BlockError> {
        if window_start > t0 {
            return Err(BlockError::WindowAfterEvaluation { window_start, t0 });
        }
        config.ensure_rank(k + 1);
        let lm = &config.last_moves()[..=k + 1];
        if t0 > 0 && lm[0] != t0 {
            return Err(BlockError::StaleEvaluation { last: lm[0], t0 });
        }
        let known = |m: u64| window_start == 0 || m >= window_start;
        let since_move = lm[..=k]
            .iter()
            .map(|&m| known(m).then(|| t0 - m))
            .collect();
        let same_block = lm
            .windows(2)
            .take(k + 1)
            .map(|w| match (known(w[0]), known(w[1])) {
                (true, true) => Some(w[0] == w[1] && w[0] > 0),
                // One moved inside the window and the other did not, so they differ.
                (true, false) | (false, true) => Some(false),
                (false, false) => None,
            })
            .collect();
        Ok(Self { t0, window_start, since_move, same_block })
    }

    pub fn k(&self) -> usize {
        self.since_move.len() - 1
    }

    /// Flag for spacing `i` (between ranks `i − 1` and `i`), `1 ≤ i ≤ k + 1`.
    pub fn spacing_in_block(&self, i: usize) -> Option<bool> {
        self.same_block[i - 1]
    }

    pub fn all_known(&self, upto: usize) -> bool {
        self.same_block[..upto].iter().all(Option::is_some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{SpacingDistribution, StoppingRule, TailLaw};
    use crate::seed::{SeedTree, Stream};

    fn cfg() -> QueueConfiguration {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        let rng = SeedTree::new(0).rng(Stream::Tail, 0);
        QueueConfiguration::from_positions(&[0.0, 1.4, 2.8, 4.0, 4.9, 6.0], TailLaw::Lattice(1.0), d, rng)
            .unwrap()
    }

    #[test]
    fn one_wave_gives_one_block() {
        let mut c = cfg();
        let mut it = [0.9, 1.2, 1.3].into_iter();
        c.advance(1, 100, StoppingRule::OwnPosition, || it.next().unwrap());
        let b = BlockDecomposition::at(&mut c, 1, 4, 0).unwrap();
        assert_eq!(b.since_move, vec![Some(0), Some(0), Some(0), Some(1), Some(1)]);
        assert_eq!(b.same_block, vec![Some(true), Some(true), Some(false), Some(false), Some(false)]);
    }

    #[test]
    fn window_marks_old_moves_unknown() {
        let mut c = cfg();
        let mut it = [0.9, 1.2, 1.3].into_iter();
        c.advance(1, 100, StoppingRule::OwnPosition, || it.next().unwrap());
        let mut it = [0.7].into_iter();
        // x₂ = 2.1 after the first wave: 0.7 ≥ 2.1 − 1.5 stops at once.
        c.advance(2, 100, StoppingRule::OwnPosition, || it.next().unwrap());
        let b = BlockDecomposition::at(&mut c, 2, 3, 2).unwrap();
        assert_eq!(b.since_move[0], Some(0));
        assert_eq!(b.since_move[1], None);
        assert_eq!(b.same_block[0], Some(false));
        assert_eq!(b.same_block[1], None);
        assert!(BlockDecomposition::at(&mut c, 2, 3, 5).is_err());
    }
}
