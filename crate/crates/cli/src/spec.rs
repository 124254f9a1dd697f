//! Experiment specification: defaults, a `key = value` file, then flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use wavefront_core::queue::{DistributionSpec, SpacingDistribution, StoppingRule, DEFAULT_HORIZON_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dist: DistributionSpec,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub j_grid: Vec<u64>,
    pub q_grid: Vec<(u64, f64)>,
    pub n_list: Vec<u64>,
    pub horizon_cap: usize,
    /// Overrides the replicate count of the command's main experiment.
    pub replicates: Option<usize>,
    pub rule: StoppingRule,
    pub out: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dist: DistributionSpec::Uniform { lo: 0.5, hi: 1.5 },
            steps: 2_000_000,
            burn_in: 100_000,
            seed: 20_240_601,
            j_grid: (4..=10).map(|p| 1 << p).collect(),
            q_grid: [64u64, 256, 1024].iter().flat_map(|&j| [1.0, 2.0, 4.0].map(|y| (j, y))).collect(),
            n_list: vec![4096],
            horizon_cap: DEFAULT_HORIZON_CAP,
            replicates: None,
            rule: StoppingRule::OwnPosition,
            out: PathBuf::from("wavefront-out"),
        }
    }
}

fn list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|x| x.trim().parse().ok()).collect()
}

fn pairs(v: &str) -> Option<Vec<(u64, f64)>> {
    v.split(',')
        .map(|p| {
            let (j, y) = p.trim().split_once(':')?;
            Some((j.trim().parse().ok()?, y.trim().parse().ok()?))
        })
        .collect()
}

impl ExperimentSpec {
    /// Sets one field from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let bad = || format!("invalid value for {key}: {value:?}");
        let v = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "dist" => self.dist = v.parse().map_err(|_| bad())?,
            "steps" => self.steps = v.parse().map_err(|_| bad())?,
            "burn-in" => self.burn_in = v.parse().map_err(|_| bad())?,
            "seed" => self.seed = v.parse().map_err(|_| bad())?,
            "j-grid" => self.j_grid = list(v).ok_or_else(bad)?,
            "q-grid" => self.q_grid = pairs(v).ok_or_else(bad)?,
            "n" => self.n_list = list(v).ok_or_else(bad)?,
            "horizon-cap" => self.horizon_cap = v.parse().map_err(|_| bad())?,
            "replicates" => self.replicates = Some(v.parse().map_err(|_| bad())?),
            "rule" => self.rule = v.parse().map_err(|_| bad())?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment. All bad lines are
    /// reported together.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = self.set(k, v) {
                        errors.push(format!("line {}: {e}", i + 1));
                    }
                }
                None => errors.push(format!("line {}: expected key = value", i + 1)),
            }
        }
        if !errors.is_empty() {
            bail!("{}: {}", path.display(), errors.join("; "));
        }
        Ok(())
    }

    /// Every invalid field, in one pass.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = SpacingDistribution::new(&self.dist) {
            out.push(format!("dist: {e}"));
        }
        if self.steps == 0 {
            out.push("steps must be positive".into());
        }
        if self.burn_in >= self.steps {
            out.push(format!("burn-in {} must be below steps {}", self.burn_in, self.steps));
        }
        if self.j_grid.is_empty() || self.j_grid.contains(&0) {
            out.push("j-grid must list positive integers".into());
        }
        if self.q_grid.iter().any(|&(j, y)| j == 0 || !y.is_finite()) {
            out.push("q-grid entries must be j:y with j > 0 and finite y".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            out.push("n must list positive integers".into());
        }
        if self.horizon_cap == 0 {
            out.push("horizon-cap must be positive".into());
        }
        if self.replicates == Some(0) {
            out.push("replicates must be positive".into());
        }
        out
    }

    /// The spec as a `key = value` file that reproduces it.
    pub fn to_conf(&self) -> String {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "dist = {}", self.dist);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "burn-in = {}", self.burn_in);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "j-grid = {}", join(&self.j_grid));
        let q: Vec<String> = self.q_grid.iter().map(|(j, y)| format!("{j}:{y}")).collect();
        let _ = writeln!(s, "q-grid = {}", q.join(","));
        let _ = writeln!(s, "n = {}", join(&self.n_list));
        let _ = writeln!(s, "horizon-cap = {}", self.horizon_cap);
        if let Some(r) = self.replicates {
            let _ = writeln!(s, "replicates = {r}");
        }
        let rule = match self.rule {
            StoppingRule::OwnPosition => "own",
            StoppingRule::PredecessorPosition => "predecessor",
        };
        let _ = writeln!(s, "rule = {rule}");
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conf_round_trips() {
        let mut spec = ExperimentSpec { replicates: Some(7), rule: StoppingRule::PredecessorPosition, ..Default::default() };
        spec.set("dist", "tri:0.5,1,1.5").unwrap();
        let dir = std::env::temp_dir().join(format!("wavefront-spec-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, spec.to_conf()).unwrap();
        let mut back = ExperimentSpec::default();
        back.apply_file(&path).unwrap();
        assert_eq!(back, spec);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn problems_are_collected() {
        let spec = ExperimentSpec { steps: 5, burn_in: 5, j_grid: vec![], horizon_cap: 0, ..Default::default() };
        assert_eq!(spec.problems().len(), 3);
    }
}
