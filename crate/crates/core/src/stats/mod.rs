//! Estimators and checks over wave records, walks and block snapshots.

mod blocks;
mod fit;
mod ks;
mod tail;
mod walk;

pub use blocks::{block_walk_compare, split_spacings, BlockStatError, BlockWalkComparison, SpacingSplit};
pub use fit::{fit_exponent, fit_log_log, FitError, PowerFit};
pub use ks::{kolmogorov_q, ks_one_sample, ks_two_sample, KsResult};
pub use tail::{wave_tail, TailCounter, TailError, TailEstimate};
pub use walk::{
    envelope, goodness_rate, goodness_rate_exact, q_exact, q_given, q_grid, q_mc, EnvelopeRow,
    GoodnessEstimate, QEstimate,
};

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
