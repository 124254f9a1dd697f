use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("support must be strictly positive (lower end {0})")]
    NonPositiveSupport(f64),
    #[error("degenerate spacing law: variance is zero")]
    Degenerate,
    #[error("invalid distribution parameters: {0}")]
    Invalid(String),
    #[error("cannot parse distribution `{0}`; expected uniform:a,b | twopoint:a,b | tri:a,m,b | atoms:v:w,...")]
    Parse(String),
}

/// Raw (un-normalised) description of a spacing law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform { lo: f64, hi: f64 },
    /// Two atoms; `p_lo` is the mass at `lo`.
    TwoPoint { lo: f64, hi: f64, p_lo: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
    /// Finite atom table with non-negative weights (normalised internally).
    Atoms { values: Vec<f64>, weights: Vec<f64> },
}

impl FromStr for DistributionSpec {
    type Err = DistributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DistributionError::Parse(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(err)?;
        let nums = |r: &str| -> Result<Vec<f64>, DistributionError> {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| err()))
                .collect()
        };
        match kind.trim() {
            "uniform" => match nums(rest)?.as_slice() {
                [lo, hi] => Ok(Self::Uniform { lo: *lo, hi: *hi }),
                _ => Err(err()),
            },
            "twopoint" => match nums(rest)?.as_slice() {
                [lo, hi] => Ok(Self::TwoPoint { lo: *lo, hi: *hi, p_lo: 0.5 }),
                [lo, hi, p] => Ok(Self::TwoPoint { lo: *lo, hi: *hi, p_lo: *p }),
                _ => Err(err()),
            },
            "tri" | "triangular" => match nums(rest)?.as_slice() {
                [lo, mode, hi] => Ok(Self::Triangular { lo: *lo, mode: *mode, hi: *hi }),
                _ => Err(err()),
            },
            "atoms" => {
                let mut values = Vec::new();
                let mut weights = Vec::new();
                for item in rest.split(',') {
                    let (v, w) = item.split_once(':').ok_or_else(err)?;
                    values.push(v.trim().parse().map_err(|_| err())?);
                    weights.push(w.trim().parse().map_err(|_| err())?);
                }
                Ok(Self::Atoms { values, weights })
            }
            _ => Err(err()),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::TwoPoint { lo, hi, p_lo } if *p_lo == 0.5 => write!(f, "twopoint:{lo},{hi}"),
            Self::TwoPoint { lo, hi, p_lo } => write!(f, "twopoint:{lo},{hi},{p_lo}"),
            Self::Triangular { lo, mode, hi } => write!(f, "tri:{lo},{mode},{hi}"),
            Self::Atoms { values, weights } => {
                write!(f, "atoms:")?;
                for (i, (v, w)) in values.iter().zip(weights).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{w}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Uniform { lo: f64, hi: f64 },
    TwoPoint { lo: f64, hi: f64, p_lo: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
    Atoms { values: Vec<f64>, cumulative: Vec<f64>, probs: Vec<f64> },
}

/// The spacing law `μ`, rescaled to mean one.
///
/// All randomness of the queue flows through [`SpacingDistribution::sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingDistribution {
    law: Law,
    spec: DistributionSpec,
    c_minus: f64,
    c_plus: f64,
    sigma: f64,
    scale: f64,
}

impl SpacingDistribution {
    /// Builds the law from raw parameters and rescales it so its mean is 1.
    pub fn new(spec: &DistributionSpec) -> Result<Self, DistributionError> {
        let (law, mean) = match spec {
            DistributionSpec::Uniform { lo, hi } => {
                check_interval(*lo, *hi)?;
                if lo == hi {
                    return Err(DistributionError::Degenerate);
                }
                (Law::Uniform { lo: *lo, hi: *hi }, 0.5 * (lo + hi))
            }
            DistributionSpec::TwoPoint { lo, hi, p_lo } => {
                check_interval(*lo, *hi)?;
                if !(0.0..=1.0).contains(p_lo) {
                    return Err(DistributionError::Invalid(format!("p_lo = {p_lo}")));
                }
                if lo == hi || *p_lo == 0.0 || *p_lo == 1.0 {
                    return Err(DistributionError::Degenerate);
                }
                (
                    Law::TwoPoint { lo: *lo, hi: *hi, p_lo: *p_lo },
                    p_lo * lo + (1.0 - p_lo) * hi,
                )
            }
            DistributionSpec::Triangular { lo, mode, hi } => {
                check_interval(*lo, *hi)?;
                if !(lo <= mode && mode <= hi) {
                    return Err(DistributionError::Invalid(format!(
                        "mode {mode} outside [{lo}, {hi}]"
                    )));
                }
                if lo == hi {
                    return Err(DistributionError::Degenerate);
                }
                (
                    Law::Triangular { lo: *lo, mode: *mode, hi: *hi },
                    (lo + mode + hi) / 3.0,
                )
            }
            DistributionSpec::Atoms { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(DistributionError::Invalid(
                        "atom table needs matching non-empty values and weights".into(),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(DistributionError::Invalid("negative atom weight".into()));
                }
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    return Err(DistributionError::Invalid("atom weights sum to zero".into()));
                }
                let mut pairs: Vec<(f64, f64)> = values
                    .iter()
                    .zip(weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(v, w)| (*v, w / total))
                    .collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let lo = pairs[0].0;
                let hi = pairs[pairs.len() - 1].0;
                check_interval(lo, hi)?;
                if lo == hi {
                    return Err(DistributionError::Degenerate);
                }
                let mean = pairs.iter().map(|(v, p)| v * p).sum();
                let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let probs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                (Law::Atoms { values, cumulative, probs }, mean)
            }
        };

        let law = law.scaled(1.0 / mean);
        let (c_minus, c_plus) = law.support();
        let variance = law.variance();
        if !(variance > 0.0) {
            return Err(DistributionError::Degenerate);
        }
        Ok(Self {
            law,
            spec: spec.clone(),
            c_minus,
            c_plus,
            sigma: variance.sqrt(),
            scale: mean,
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DistributionError> {
        Self::new(&DistributionSpec::Uniform { lo, hi })
    }

    pub fn two_point(lo: f64, hi: f64) -> Result<Self, DistributionError> {
        Self::new(&DistributionSpec::TwoPoint { lo, hi, p_lo: 0.5 })
    }

    pub fn triangular(lo: f64, mode: f64, hi: f64) -> Result<Self, DistributionError> {
        Self::new(&DistributionSpec::Triangular { lo, mode, hi })
    }

    /// The raw parameters this law was built from.
    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn c_minus(&self) -> f64 {
        self.c_minus
    }

    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }

    /// Always 1; kept for symmetry with the other moments.
    pub fn mean(&self) -> f64 {
        1.0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Factor the raw parameters were divided by.
    pub fn raw_mean(&self) -> f64 {
        self.scale
    }

    /// Two atoms `(lo, hi, p_lo)` when the law is a two-point law.
    pub fn two_point_atoms(&self) -> Option<(f64, f64, f64)> {
        match self.law {
            Law::TwoPoint { lo, hi, p_lo } => Some((lo, hi, p_lo)),
            _ => None,
        }
    }

    /// Finite support as `(value, probability)` pairs, if the law is discrete.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match &self.law {
            Law::TwoPoint { lo, hi, p_lo } => Some(vec![(*lo, *p_lo), (*hi, 1.0 - p_lo)]),
            Law::Atoms { values, probs, .. } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
            _ => None,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Law::TwoPoint { lo, hi, p_lo } => {
                if rng.random::<f64>() < *p_lo {
                    *lo
                } else {
                    *hi
                }
            }
            Law::Triangular { lo, mode, hi } => {
                let u: f64 = rng.random();
                let split = (mode - lo) / (hi - lo);
                if u < split {
                    lo + ((hi - lo) * (mode - lo) * u).sqrt()
                } else {
                    hi - ((hi - lo) * (hi - mode) * (1.0 - u)).sqrt()
                }
            }
            Law::Atoms { values, cumulative, .. } => {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|c| *c <= u);
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// Cumulative distribution function `μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law::TwoPoint { lo, hi, p_lo } => {
                if x < *lo {
                    0.0
                } else if x < *hi {
                    *p_lo
                } else {
                    1.0
                }
            }
            Law::Triangular { lo, mode, hi } => {
                if x <= *lo {
                    0.0
                } else if x >= *hi {
                    1.0
                } else if x <= *mode {
                    (x - lo).powi(2) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - x).powi(2) / ((hi - lo) * (hi - mode))
                }
            }
            Law::Atoms { values, probs, .. } => values
                .iter()
                .zip(probs)
                .take_while(|(v, _)| **v <= x)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0),
        }
    }
}

impl Law {
    fn scaled(self, k: f64) -> Law {
        match self {
            Law::Uniform { lo, hi } => Law::Uniform { lo: lo * k, hi: hi * k },
            Law::TwoPoint { lo, hi, p_lo } => Law::TwoPoint { lo: lo * k, hi: hi * k, p_lo },
            Law::Triangular { lo, mode, hi } => Law::Triangular {
                lo: lo * k,
                mode: mode * k,
                hi: hi * k,
            },
            Law::Atoms { values, cumulative, probs } => Law::Atoms {
                values: values.into_iter().map(|v| v * k).collect(),
                cumulative,
                probs,
            },
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Law::Uniform { lo, hi } | Law::TwoPoint { lo, hi, .. } | Law::Triangular { lo, hi, .. } => {
                (*lo, *hi)
            }
            Law::Atoms { values, .. } => (values[0], values[values.len() - 1]),
        }
    }

    fn variance(&self) -> f64 {
        match self {
            Law::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Law::TwoPoint { lo, hi, p_lo } => (hi - lo).powi(2) * p_lo * (1.0 - p_lo),
            Law::Triangular { lo, mode, hi } => {
                (lo * lo + mode * mode + hi * hi - lo * mode - lo * hi - mode * hi) / 18.0
            }
            Law::Atoms { values, probs, .. } => {
                let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v - mean).powi(2))
                    .sum()
            }
        }
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<(), DistributionError> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(DistributionError::Invalid("support must be finite".into()));
    }
    if lo <= 0.0 {
        return Err(DistributionError::NonPositiveSupport(lo));
    }
    if hi < lo {
        return Err(DistributionError::Invalid(format!("upper end {hi} below lower end {lo}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{SeedTree, Stream};

    #[test]
    fn uniform_moments() {
        let d = SpacingDistribution::uniform(0.5, 1.5).unwrap();
        assert_eq!((d.c_minus(), d.c_plus()), (0.5, 1.5));
        assert!((d.sigma() - 1.0 / 12f64.sqrt()).abs() < 1e-15);
        assert!((d.sigma() - 0.288675).abs() < 1e-6);
    }

    #[test]
    fn two_point_moments() {
        let d = SpacingDistribution::two_point(0.5, 1.5).unwrap();
        assert_eq!(d.sigma(), 0.5);
        assert_eq!(d.two_point_atoms(), Some((0.5, 1.5, 0.5)));
    }

    #[test]
    fn raw_uniform_is_rescaled() {
        let d = SpacingDistribution::uniform(1.0, 3.0).unwrap();
        assert_eq!((d.c_minus(), d.c_plus()), (0.5, 1.5));
        assert_eq!(d.raw_mean(), 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            SpacingDistribution::uniform(0.0, 2.0),
            Err(DistributionError::NonPositiveSupport(0.0))
        );
        assert_eq!(
            SpacingDistribution::uniform(-1.0, 2.0),
            Err(DistributionError::NonPositiveSupport(-1.0))
        );
        assert_eq!(SpacingDistribution::uniform(1.0, 1.0), Err(DistributionError::Degenerate));
        assert_eq!(SpacingDistribution::two_point(1.0, 1.0), Err(DistributionError::Degenerate));
        let point_mass = DistributionSpec::Atoms { values: vec![2.0, 3.0], weights: vec![1.0, 0.0] };
        assert_eq!(SpacingDistribution::new(&point_mass), Err(DistributionError::Degenerate));
    }

    #[test]
    fn parses_cli_forms() {
        let d: DistributionSpec = "uniform:0.5,1.5".parse().unwrap();
        assert_eq!(d, DistributionSpec::Uniform { lo: 0.5, hi: 1.5 });
        let d: DistributionSpec = "twopoint:1,3".parse().unwrap();
        assert_eq!(d, DistributionSpec::TwoPoint { lo: 1.0, hi: 3.0, p_lo: 0.5 });
        let d: DistributionSpec = "tri:0.5,1,1.5".parse().unwrap();
        assert_eq!(d.to_string(), "tri:0.5,1,1.5");
        let d: DistributionSpec = "atoms:1:0.25,2:0.75".parse().unwrap();
        assert_eq!(d.to_string(), "atoms:1:0.25,2:0.75");
        assert!("gamma:1,2".parse::<DistributionSpec>().is_err());
        assert!("uniform:1".parse::<DistributionSpec>().is_err());
    }

    fn sample_moments(d: &SpacingDistribution, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = SeedTree::new(seed).rng(Stream::Analysis, 0);
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(xs.iter().all(|x| (d.c_minus()..=d.c_plus()).contains(x)));
        (m, v.sqrt())
    }

    #[test]
    fn sample_moments_match_for_every_kind() {
        let laws = [
            SpacingDistribution::uniform(0.5, 1.5).unwrap(),
            SpacingDistribution::two_point(0.5, 1.5).unwrap(),
            SpacingDistribution::triangular(1.0, 1.5, 4.0).unwrap(),
            SpacingDistribution::new(&"atoms:1:1,2:2,4:1".parse().unwrap()).unwrap(),
        ];
        for (k, d) in laws.iter().enumerate() {
            let (m, s) = sample_moments(d, 1_000_000, k as u64);
            assert!((m - 1.0).abs() < 5e-3, "{d:?}: mean {m}");
            assert!((s - d.sigma()).abs() < 5e-3, "{d:?}: sd {s}");
        }
    }

    #[test]
    fn cdf_is_consistent_with_support() {
        let d = SpacingDistribution::triangular(0.5, 1.0, 1.5).unwrap();
        assert_eq!(d.cdf(d.c_minus()), 0.0);
        assert_eq!(d.cdf(d.c_plus()), 1.0);
        assert!((d.cdf(1.0) - 0.5).abs() < 1e-12);
        let t = SpacingDistribution::two_point(0.5, 1.5).unwrap();
        assert_eq!(t.cdf(0.7), 0.5);
    }
}
