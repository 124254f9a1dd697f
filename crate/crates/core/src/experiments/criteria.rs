use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::main_run::MainRun;
use super::checks::StructureReport;
use super::{tol, Verdict};
use crate::cbm::{estimate_density, meeting_probability, time1_points, DensityEstimate, Increment, MeetingEstimate, ParticleSystem};
use crate::queue::{DistributionSpec, QueueConfiguration, Simulation, SpacingDistribution};
use crate::representation::{coalescence_position, previous_positions, Coalescence, CountingFunction, GGraph, PointProcessSample};
use crate::seed::{SeedTree, Stream};
use crate::stats::{envelope, fit_exponent, goodness_rate, ks_one_sample, ks_two_sample, mean_se, q_mc, EnvelopeRow, GoodnessEstimate, PowerFit, TailEstimate};

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "out of range"
    }
}

/// OLS slope of `log ρ̂(j)` on `log j` over the whole grid.
pub fn tail_fit(run: &MainRun) -> Option<PowerFit> {
    grid_fit(&run.tail)
}

fn grid_fit(tail: &TailEstimate) -> Option<PowerFit> {
    let g = &tail.j_grid;
    fit_exponent(tail, *g.first()?, *g.last()?).ok()
}

pub fn criterion_1(run: &MainRun) -> Verdict {
    tail_verdict(&run.tail, run.config.steps, run.elapsed_secs)
}

/// Criterion 1 from a tail estimate and the wall time of the run behind it.
pub fn tail_verdict(tail: &TailEstimate, steps: u64, elapsed_secs: f64) -> Verdict {
    let Some(fit) = grid_fit(tail) else {
        return Verdict::new(1, "tail exponent", false, "no fit: empty tail counts".into());
    };
    let (lo, hi) = tol::SLOPE_BAND;
    let slope_ok = fit.slope >= lo && fit.slope <= hi;
    let r2_ok = fit.r2 >= tol::R2_MIN;
    let time_ok = elapsed_secs <= tol::TAIL_RUNTIME_SECS;
    Verdict::new(
        1,
        "tail exponent",
        slope_ok && r2_ok && time_ok,
        format!(
            "slope {:.4} in [{lo}, {hi}] {}; r2 {:.4} >= {} {}; {} steps in {:.0}s <= {}s {}",
            fit.slope,
            pass_word(slope_ok),
            fit.r2,
            tol::R2_MIN,
            pass_word(r2_ok),
            steps,
            elapsed_secs,
            tol::TAIL_RUNTIME_SECS,
            pass_word(time_ok)
        ),
    )
}

/// `ρ̂(j)·√j·σ` for each `j` in the grid.
pub fn rate_constants(run: &MainRun) -> Vec<(u64, f64)> {
    tail_constants(&run.tail, run.sigma)
}

fn tail_constants(tail: &TailEstimate, sigma: f64) -> Vec<(u64, f64)> {
    tail.j_grid.iter().zip(&tail.rho_hat).map(|(&j, &r)| (j, r * (j as f64).sqrt() * sigma)).collect()
}

pub fn criterion_2(run: &MainRun, rho1: f64) -> Verdict {
    rate_verdict(&run.tail, run.sigma, rho1)
}

pub fn rate_verdict(tail: &TailEstimate, sigma: f64, rho1: f64) -> Verdict {
    let consts = tail_constants(tail, sigma);
    let mut ok = true;
    let mut parts = Vec::new();
    for j in tol::RATE_JS {
        match consts.iter().find(|c| c.0 == j) {
            Some(&(_, v)) => {
                let rel = v / rho1 - 1.0;
                ok &= rel.abs() <= tol::RATE_REL_TOL;
                parts.push(format!("j={j}: {v:.4} ({:+.1}%)", 100.0 * rel));
            }
            None => {
                ok = false;
                parts.push(format!("j={j}: not in grid"));
            }
        }
    }
    Verdict::new(
        2,
        "rate constant",
        ok,
        format!("{} vs rho1 {rho1:.4}, tolerance {:.0}%", parts.join(", "), 100.0 * tol::RATE_REL_TOL),
    )
}

pub fn criterion_3(run: &MainRun) -> Verdict {
    let n = run.blocks.len();
    let held = run.blocks.iter().filter(|b| b.holds(tol::BLOCK_TOL)).count();
    let worst = run.blocks.iter().map(|b| b.gap() - b.bound).fold(f64::NEG_INFINITY, f64::max);
    Verdict::new(
        3,
        "block inequality",
        held == n && n >= tol::BLOCK_MIN_INSTANCES,
        format!("holds on {held}/{n} instances (need all, at least {}); worst excess {worst:.4}", tol::BLOCK_MIN_INSTANCES),
    )
}

/// Mean `|X_k − S_k|` with its standard error, per `k`.
pub fn spread_means(run: &MainRun) -> Vec<(usize, f64, f64)> {
    run.config
        .block_ks
        .iter()
        .map(|&k| {
            let gaps: Vec<f64> = run.blocks.iter().filter(|b| b.k == k).map(|b| b.gap()).collect();
            let (m, se) = mean_se(&gaps);
            (k, m, se)
        })
        .collect()
}

pub fn criterion_4(run: &MainRun) -> Verdict {
    let means = spread_means(run);
    let mut ok = means.len() >= 2;
    let mut parts: Vec<String> = means.iter().map(|(k, m, se)| format!("k={k}: {m:.3}±{se:.3}")).collect();
    for w in means.windows(2) {
        let factor = w[1].1 / w[0].1;
        ok &= factor <= tol::SPREAD_FACTOR_MAX;
        parts.push(format!("x{factor:.2}"));
    }
    Verdict::new(4, "spread bound", ok, format!("{}; max factor {}", parts.join(", "), tol::SPREAD_FACTOR_MAX))
}

pub fn criterion_5(run: &MainRun) -> Verdict {
    let dist = SpacingDistribution::new(&run.config.dist).expect("validated");
    let inb = &run.spacings.in_block;
    let bnd = &run.spacings.boundary;
    let ks_in = ks_one_sample(inb, |x| dist.cdf(x));
    let ks_b = ks_one_sample(bnd, |x| dist.cdf(x));
    let enough = inb.len() >= run.config.in_block_target;
    let ok = enough && ks_in.passes(tol::KS_ALPHA) && !bnd.is_empty() && !ks_b.passes(tol::KS_ALPHA);
    Verdict::new(
        5,
        "conditional spacings",
        ok,
        format!(
            "in-block n={} D={:.4} p={:.3} (need p > {}); boundary control n={} p={:.2e} (need rejection)",
            inb.len(),
            ks_in.d,
            ks_in.p_value,
            tol::KS_ALPHA,
            bnd.len(),
            ks_b.p_value
        ),
    )
}

/// Parameters of the walk-maximum checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub dist: DistributionSpec,
    pub seed: u64,
    pub envelope_js: Vec<u64>,
    pub envelope_ys: Vec<f64>,
    pub y_floor: f64,
    pub envelope_replicates: u64,
    pub goodness_js: Vec<u64>,
    pub goodness_ys: Vec<f64>,
    pub goodness_samples: u64,
    pub q_ref_replicates: u64,
    pub max_inner: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            dist: DistributionSpec::Uniform { lo: 0.5, hi: 1.5 },
            seed: 20_240_602,
            envelope_js: vec![64, 256, 1024],
            envelope_ys: vec![1.0, 2.0, 4.0],
            y_floor: 0.01,
            envelope_replicates: 200_000,
            goodness_js: vec![64, 256],
            goodness_ys: vec![2.0, 4.0],
            goodness_samples: 10_000,
            q_ref_replicates: 200_000,
            max_inner: 4096,
        }
    }
}

pub fn run_envelope(cfg: &WalkConfig) -> Vec<EnvelopeRow> {
    let dist = SpacingDistribution::new(&cfg.dist).expect("valid distribution");
    let mut rng = SeedTree::new(cfg.seed).rng(Stream::Walk, 0);
    envelope(&cfg.envelope_js, &cfg.envelope_ys, cfg.y_floor, &dist, cfg.envelope_replicates, &mut rng)
}

pub fn criterion_6(rows: &[EnvelopeRow]) -> Verdict {
    let mut ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut ok = !ys.is_empty();
    let mut parts = Vec::new();
    for y in ys {
        let vals: Vec<f64> = rows.iter().filter(|r| r.y == y).map(|r| r.value).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let ratio = hi / lo;
        ok &= lo > 0.0 && ratio <= tol::ENVELOPE_RATIO_MAX;
        let shown: Vec<String> = vals.iter().map(|v| format!("{v:.3}")).collect();
        parts.push(format!("y={y}: [{}] ratio {ratio:.3}", shown.join(", ")));
    }
    Verdict::new(6, "walk envelope", ok, format!("{}; max ratio {}", parts.join("; "), tol::ENVELOPE_RATIO_MAX))
}

/// Not-good rates on the goodness grid; the reference `q(j, y)` comes from an
/// independent stream.
pub fn run_goodness(cfg: &WalkConfig) -> Vec<GoodnessEstimate> {
    let dist = SpacingDistribution::new(&cfg.dist).expect("valid distribution");
    let seeds = SeedTree::new(cfg.seed);
    let cells: Vec<(u64, f64)> =
        cfg.goodness_js.iter().flat_map(|&j| cfg.goodness_ys.iter().map(move |&y| (j, y))).collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(j, y))| {
            let mut rng = seeds.rng(Stream::Walk, 1 + 2 * i as u64);
            let q = q_mc(j, y, &dist, cfg.q_ref_replicates, &mut rng).q_hat;
            let mut rng = seeds.rng(Stream::Walk, 2 + 2 * i as u64);
            goodness_rate(j, y, &dist, q, cfg.goodness_samples, cfg.max_inner, &mut rng)
        })
        .collect()
}

pub fn criterion_7(rows: &[GoodnessEstimate]) -> Verdict {
    let limit = |g: &GoodnessEstimate| tol::GOODNESS_LIMIT + tol::GOODNESS_SE_MULT * g.se;
    let ok = !rows.is_empty() && rows.iter().all(|g| g.not_good <= limit(g));
    let parts: Vec<String> = rows
        .iter()
        .map(|g| format!("(j={}, y={}): {:.4}±{:.4} (q={:.4})", g.j, g.y, g.not_good, g.se, g.q_ref))
        .collect();
    Verdict::new(7, "goodness rate", ok, format!("{}; limit 0.5 + 3 SE", parts.join(", ")))
}

/// Result of checking the coalescence point of consecutive graphs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoalescenceCheck {
    pub steps: u64,
    pub matched: u64,
    /// Censored steps; for these the graphs must not coalesce within the
    /// reached range, and a match means the sentinel was returned.
    pub censored: u64,
    pub mismatches: Vec<(u64, f64, String)>,
}

/// Compares `coalescence_position(G(t−1,·), G(t,·))` with `L(t)` on every step.
///
/// The common window extends to `2L(t) + 16`, so any disagreement beyond
/// `L(t)` inside twice the wave would be seen. A censored wave has no
/// observable `L(t)`: the window is then the reached range and the expected
/// answer is [`Coalescence::BeyondWindow`].
pub fn coalescence_check(dist: &DistributionSpec, seed: u64, steps: u64) -> CoalescenceCheck {
    let dist = SpacingDistribution::new(dist).expect("valid distribution");
    let seeds = SeedTree::new(seed);
    let mut config = QueueConfiguration::iid(dist.clone(), seeds.rng(Stream::Tail, 0));
    config.enable_journal();
    let mut sim = Simulation::new(config, seeds.rng(Stream::Steps, 0));
    let mut out = CoalescenceCheck::default();
    for _ in 0..steps {
        let rec = sim.step();
        out.steps += 1;
        out.censored += rec.censored as u64;
        let x_max = if rec.censored { rec.l } else { 2.0 * rec.l + 16.0 };
        let cfg = sim.config_mut();
        let prev = previous_positions(cfg, rec.w, rec.censored, x_max).expect("journal enabled");
        let g_prev = GGraph::new(rec.t - 1, CountingFunction::from_positions(prev, x_max));
        let g_curr = GGraph::new(rec.t, CountingFunction::from_config(cfg, x_max));
        match (coalescence_position(&g_prev, &g_curr), rec.censored) {
            (Coalescence::At(x), false) if x.to_bits() == rec.l.to_bits() => out.matched += 1,
            (Coalescence::BeyondWindow, true) => out.matched += 1,
            (other, _) => {
                if out.mismatches.len() < 16 {
                    out.mismatches.push((rec.t, rec.l, format!("{other:?}")));
                }
            }
        }
    }
    out
}

pub fn criterion_8(chk: &CoalescenceCheck) -> Verdict {
    let ok = chk.matched == chk.steps && chk.steps > 0;
    let first = chk.mismatches.first().map(|m| format!("; first mismatch at t={} (L={}): {}", m.0, m.1, m.2));
    Verdict::new(
        8,
        "coalescence identity",
        ok,
        format!(
            "coalescence point equals L(t) on {}/{} steps ({} censored, sentinel expected){}",
            chk.matched,
            chk.steps,
            chk.censored,
            first.unwrap_or_default()
        ),
    )
}

/// Parameters of the particle-system checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub seed: u64,
    pub eps: f64,
    pub times: Vec<f64>,
    /// Interior counting window; the start interval adds `4√t` on each side.
    pub window: f64,
    pub replicates: usize,
    pub dt: f64,
    pub meet_distance: f64,
    pub meet_time: f64,
    pub meet_dt: f64,
    pub meet_replicates: usize,
    /// Time-1 sample used for the point-process comparison.
    pub time1_eps: f64,
    pub time1_replicates: usize,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_603,
            eps: 0.05,
            times: vec![1.0, 2.0, 4.0],
            window: 40.0,
            replicates: 300,
            dt: 1e-4,
            meet_distance: 1.0,
            meet_time: 1.0,
            meet_dt: 1e-3,
            meet_replicates: 10_000,
            time1_eps: 0.01,
            time1_replicates: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub densities: Vec<DensityEstimate>,
    pub meeting: MeetingEstimate,
}

pub fn run_scaling(cfg: &ParticleConfig) -> ScalingResult {
    let seeds = SeedTree::new(cfg.seed);
    let densities = cfg
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let lambda = cfg.window + 8.0 * t.sqrt();
            estimate_density(cfg.eps, lambda, t, cfg.replicates, cfg.dt, &seeds, (i as u64 + 1) << 40)
        })
        .collect();
    let mut rng = seeds.rng(Stream::Particles, 0xffff << 32);
    let meeting = meeting_probability(cfg.meet_distance, cfg.meet_time, cfg.meet_dt, cfg.meet_replicates, &mut rng);
    ScalingResult { densities, meeting }
}

pub fn criterion_9(res: &ScalingResult) -> Verdict {
    let scaled: Vec<f64> = res.densities.iter().map(|d| d.rho_hat * d.t.sqrt()).collect();
    let (m, _) = mean_se(&scaled);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / m;
    let z = res.meeting.z_score();
    let ok = spread <= tol::DENSITY_SCALING_TOL && z.abs() <= tol::MEETING_Z_MAX;
    let shown: Vec<String> =
        res.densities.iter().zip(&scaled).map(|(d, s)| format!("t={}: {s:.4}±{:.4}", d.t, d.se * d.t.sqrt())).collect();
    Verdict::new(
        9,
        "density scaling",
        ok,
        format!(
            "rho_t*sqrt(t) {} spread {:.2}% (max {:.0}%); no-meet {:.4} vs {:.4}, z={z:+.2} (max {})",
            shown.join(", "),
            100.0 * spread,
            100.0 * tol::DENSITY_SCALING_TOL,
            res.meeting.no_meet,
            res.meeting.oracle,
            tol::MEETING_Z_MAX
        ),
    )
}

/// Cluster positions at `t = 1` in the interior of independent grid starts.
pub fn cbm_time1_samples(cfg: &ParticleConfig) -> Vec<PointProcessSample> {
    let seeds = SeedTree::new(cfg.seed);
    let lambda = cfg.window + 8.0;
    (0..cfg.time1_replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeds.rng(Stream::Particles, (0xfffe << 32) + k);
            let mut sys = ParticleSystem::grid(0.0, lambda, cfg.time1_eps, cfg.dt, Increment::Gaussian);
            sys.evolve(1.0, &mut rng).expect("1 is a multiple of dt");
            time1_points(&sys, (4.0, 4.0 + cfg.window), k)
        })
        .collect()
}

fn pooled(samples: &[PointProcessSample]) -> (Vec<f64>, f64) {
    let spacings = samples.iter().flat_map(|s| s.spacings()).collect();
    let n: usize = samples.iter().map(|s| s.len()).sum();
    let len: f64 = samples.iter().map(|s| s.window.1 - s.window.0).sum();
    (spacings, n as f64 / len)
}

pub fn criterion_10(run: &MainRun, cbm: &[PointProcessSample]) -> Verdict {
    let (zs, zi) = pooled(&run.zeta);
    let (cs, ci) = pooled(cbm);
    let ks = ks_two_sample(&zs, &cs);
    let rel = zi / ci - 1.0;
    let ok = !zs.is_empty() && ks.passes(tol::KS_ALPHA) && rel.abs() <= tol::INTENSITY_REL_TOL;
    Verdict::new(
        10,
        "point-process match",
        ok,
        format!(
            "spacings KS n={}/{} D={:.4} p={:.3} (need p > {}); intensity {zi:.4} vs {ci:.4} ({:+.1}%, max {:.0}%)",
            zs.len(),
            cs.len(),
            ks.d,
            ks.p_value,
            tol::KS_ALPHA,
            100.0 * rel,
            100.0 * tol::INTENSITY_REL_TOL
        ),
    )
}

pub fn criterion_11(run: &MainRun) -> Verdict {
    structure_verdict(&run.structure, run.config.structure_steps.min(run.config.steps))
}

/// Criterion 11 from a checker report that should cover `want` steps.
pub fn structure_verdict(rep: &StructureReport, want: u64) -> Verdict {
    let ok = rep.total_violations() == 0 && rep.steps == want && want > 0;
    let counts: Vec<String> = rep.counts.iter().map(|(p, c)| format!("{p}={c}")).collect();
    Verdict::new(
        11,
        "structural properties",
        ok,
        format!("{} steps, {} checks; violations {}", rep.steps, rep.checks, counts.join(" ")),
    )
}
