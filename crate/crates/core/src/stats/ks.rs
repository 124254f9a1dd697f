use std::f64::consts::PI;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// Supremum distance between the distribution functions.
    pub d: f64,
    /// Effective sample size (`n` or `nm / (n + m)`).
    pub n_eff: f64,
    pub p_value: f64,
}

impl KsResult {
    fn new(d: f64, n_eff: f64) -> Self {
        let s = n_eff.sqrt();
        let p_value = kolmogorov_q((s + 0.12 + 0.11 / s) * d);
        Self { d, n_eff, p_value }
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Survival function of the Kolmogorov distribution, `Pr(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form converges fast for small λ.
        let a = PI * PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (-m * m * a).exp();
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut q = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            q += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * q).clamp(0.0, 1.0)
    }
}

/// One-sample test of `sample` against the continuous distribution function `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsResult::new(d, n)
}

/// Two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsResult::new(d, n * m / (n + m))
}
