use serde::Serialize;
use thiserror::Error;

use super::TailEstimate;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 4 points with nonzero counts, have {0}")]
    TooFewPoints(usize),
}

/// Least-squares line through `(log j, log ρ̂(j))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub j_used: Vec<u64>,
}

/// Ordinary least squares on log-log points; needs at least 4 points.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<(f64, f64, f64), FitError> {
    if points.len() < 4 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Fits `log ρ̂ = a + b log j` over grid points in `[j_min, j_max]`.
///
/// If a grid point in the window has a zero count, the window is cut just
/// below it (larger `j` only have fewer exceedances).
pub fn fit_exponent(est: &TailEstimate, j_min: u64, j_max: u64) -> Result<PowerFit, FitError> {
    let mut pts = Vec::new();
    let mut j_used = Vec::new();
    for (k, &j) in est.j_grid.iter().enumerate() {
        if j < j_min || j > j_max || j == 0 {
            continue;
        }
        if est.counts[k] == 0 {
            log::warn!("zero exceedances at j = {j}; fit window shrunk to j < {j}");
            break;
        }
        pts.push((j as f64, est.rho_hat[k]));
        j_used.push(j);
    }
    let (slope, intercept, r2) = fit_log_log(&pts)?;
    Ok(PowerFit { slope, intercept, r2, j_used })
}
