use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use log::info;
use serde_json::{json, Value};
use wavefront_core::cbm::{rho1_ladder, DensityConfig, Rho1Estimate};
use wavefront_core::experiments::{self as ex, MainRun, MainRunConfig, Verdict};
use wavefront_core::export::{self, to_file};
use wavefront_core::queue::{RecordSink, Simulation, SpacingDistribution};
use wavefront_core::representation::PointProcessSample;
use wavefront_core::stats::{ks_two_sample, q_mc, wave_tail};
use wavefront_core::{SeedTree, Stream};

use crate::spec::ExperimentSpec;

/// Structural checks cover at most this many leading steps.
const STRUCTURE_STEPS: u64 = 1_000_000;
/// Ranks written to the configuration snapshot.
const SNAPSHOT_RANKS: usize = 16_384;
/// Criterion 10 is stated at this threshold; other `n` are reported only.
const GATED_N: u64 = 4096;

/// Where a command writes, and what it wrote.
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub extra: serde_json::Map<String, Value>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), extra: serde_json::Map::new() })
    }

    fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<File>) -> Result<(), export::ExportError>,
    {
        let path = self.dir.join(name);
        to_file(&path, f).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }
}

fn dist(spec: &ExperimentSpec) -> SpacingDistribution {
    SpacingDistribution::new(&spec.dist).expect("validated spec")
}

fn run_config(spec: &ExperimentSpec) -> MainRunConfig {
    MainRunConfig {
        dist: spec.dist.clone(),
        seed: spec.seed,
        steps: spec.steps,
        burn_in: spec.burn_in,
        horizon_cap: spec.horizon_cap,
        rule: spec.rule,
        j_grid: spec.j_grid.clone(),
        zeta_n: spec.n_list.iter().copied().min().unwrap_or(GATED_N),
        ..MainRunConfig::default()
    }
}

pub fn simulate(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let d = dist(spec);
    let seeds = SeedTree::new(spec.seed);
    let mut sim = Simulation::seeded(d.clone(), &seeds, 0).with_horizon_cap(spec.horizon_cap).with_rule(spec.rule);
    let mut sink = RecordSink::default();
    let checked = spec.steps.min(STRUCTURE_STEPS);
    let mut checker = ex::StructureChecker::new(checked, d.c_minus(), d.c_plus());
    let start = Instant::now();
    sim.run(checked, &mut [&mut sink, &mut checker]);
    sim.run(spec.steps - checked, &mut [&mut sink]);
    let elapsed = start.elapsed().as_secs_f64();
    info!("simulated {} steps in {elapsed:.1}s", spec.steps);

    out.write("waves.csv", |w| export::write_waves(w, &sink.records))?;
    let cfg = sim.config_mut();
    cfg.ensure_rank(SNAPSHOT_RANKS - 1);
    let (xs, lm) = (cfg.positions()[..SNAPSHOT_RANKS].to_vec(), cfg.last_moves()[..SNAPSHOT_RANKS].to_vec());
    out.write("snapshot.csv", |w| export::write_snapshot(w, &xs, &lm))?;
    out.note("elapsed_secs", json!(elapsed));
    out.note("censored", json!(sink.records.iter().filter(|r| r.censored).count()));
    let mut verdicts = Vec::new();
    if checked == STRUCTURE_STEPS {
        verdicts.push(ex::structure_verdict(checker.report(), checked));
    } else {
        out.note("structure", serde_json::to_value(checker.report())?);
    }
    Ok(verdicts)
}

/// Reads the simulate manifest for the run time, if there is one.
fn simulate_elapsed(dir: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(dir.join("manifest-simulate.json")).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get("extra")?.get("elapsed_secs")?.as_f64()
}

pub fn tail(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let path = out.dir.join("waves.csv");
    let file = File::open(&path)
        .map_err(|_| anyhow!("{} not found; produce it with `wavefront simulate`", path.display()))?;
    let records = export::read_waves(BufReader::new(file))?;
    let est = wave_tail(&records, &spec.j_grid, spec.burn_in)?;
    out.write("tail.csv", |w| export::write_tail(w, &est))?;
    let elapsed = simulate_elapsed(&out.dir).unwrap_or(f64::NAN);
    let mut verdicts = vec![ex::tail_verdict(&est, records.len() as u64, elapsed)];
    let r = ladder(spec, spec.replicates, out)?;
    verdicts.push(ex::rate_verdict(&est, dist(spec).sigma(), r.rho1));
    Ok(verdicts)
}

fn walk_config(spec: &ExperimentSpec) -> ex::WalkConfig {
    let mut cfg = ex::WalkConfig { dist: spec.dist.clone(), seed: spec.seed, ..ex::WalkConfig::default() };
    if let Some(r) = spec.replicates {
        cfg.goodness_samples = r as u64;
    }
    cfg
}

pub fn q(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let cfg = walk_config(spec);
    let d = dist(spec);
    let seeds = SeedTree::new(spec.seed);
    let rows: Vec<_> = spec
        .q_grid
        .iter()
        .enumerate()
        .map(|(i, &(j, y))| q_mc(j, y, &d, cfg.q_ref_replicates, &mut seeds.rng(Stream::Walk, 1000 + i as u64)))
        .collect();
    out.write("q.csv", |w| export::write_q(w, &rows))?;
    let env = ex::run_envelope(&cfg);
    out.write("envelope.csv", |w| export::write_envelope(w, &env))?;
    let good = ex::run_goodness(&cfg);
    out.write("goodness.csv", |w| export::write_goodness(w, &good))?;
    Ok(vec![ex::criterion_6(&env), ex::criterion_7(&good)])
}

fn write_run_tables(run: &MainRun, out: &mut Outputs) -> Result<()> {
    out.write("tail.csv", |w| export::write_tail(w, &run.tail))?;
    out.write("blocks.csv", |w| export::write_blocks(w, &run.blocks))?;
    let spacings = [
        PointProcessSample { points: run.spacings.in_block.clone(), window: (0.0, 1.0), replicate: 0 },
        PointProcessSample { points: run.spacings.boundary.clone(), window: (0.0, 1.0), replicate: 1 },
    ];
    // Replicate 0 holds in-block spacings, replicate 1 boundary spacings.
    out.write("spacings.csv", |w| export::write_points(w, &spacings))?;
    out.note("elapsed_secs", json!(run.elapsed_secs));
    out.note("censored", json!(run.tail.censored));
    Ok(())
}

pub fn blocks(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let mut cfg = MainRunConfig { structure_steps: 0, zeta_replicates: 0, ..run_config(spec) };
    if let Some(r) = spec.replicates {
        cfg.block_instances = r;
    }
    let run = ex::main_run(&cfg);
    write_run_tables(&run, out)?;
    Ok(vec![ex::criterion_3(&run), ex::criterion_4(&run), ex::criterion_5(&run)])
}

fn particle_config(spec: &ExperimentSpec) -> ex::ParticleConfig {
    let mut cfg = ex::ParticleConfig { seed: spec.seed, ..ex::ParticleConfig::default() };
    if let Some(r) = spec.replicates {
        cfg.replicates = r;
        cfg.time1_replicates = r;
    }
    cfg
}

fn ladder(spec: &ExperimentSpec, replicates: Option<usize>, out: &mut Outputs) -> Result<Rho1Estimate> {
    let mut dcfg = DensityConfig { seed: spec.seed, ..DensityConfig::default() };
    if let Some(r) = replicates {
        dcfg.replicates = r;
    }
    let ladder = rho1_ladder(&dcfg).map_err(|e| anyhow!("density ladder rejected: {e}"))?;
    out.write("density_ladder.csv", |w| export::write_density(w, &ladder.rungs))?;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    out.note("rho1", json!({"value": ladder.rho1, "se": ladder.se, "inverse_sqrt_pi": inv_sqrt_pi}));
    println!("rho1 = {:.4} ± {:.4} (1/sqrt(pi) = {inv_sqrt_pi:.4}, informational)", ladder.rho1, ladder.se);
    Ok(ladder)
}

pub fn cbm(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    ladder(spec, spec.replicates, out)?;
    particles(spec, out)
}

fn particles(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let pcfg = particle_config(spec);
    let scaling = ex::run_scaling(&pcfg);
    out.write("density_scaling.csv", |w| export::write_density(w, &scaling.densities))?;
    out.note("meeting", serde_json::to_value(scaling.meeting)?);
    let samples = ex::cbm_time1_samples(&pcfg);
    let snaps: Vec<(u64, f64, Vec<f64>)> = samples.iter().map(|s| (s.replicate, 1.0, s.points.clone())).collect();
    out.write("clusters.csv", |w| export::write_clusters(w, &snaps))?;
    Ok(vec![ex::criterion_9(&scaling)])
}

fn compare_tables(
    spec: &ExperimentSpec,
    run: &MainRun,
    cbm: &[PointProcessSample],
    out: &mut Outputs,
) -> Result<Vec<Verdict>> {
    let mut verdicts = Vec::new();
    let mut table = Vec::new();
    let pooled = |s: &[PointProcessSample]| -> (Vec<f64>, f64) {
        let n: usize = s.iter().map(|p| p.len()).sum();
        let len: f64 = s.iter().map(|p| p.window.1 - p.window.0).sum();
        (s.iter().flat_map(|p| p.spacings()).collect(), n as f64 / len)
    };
    let (cs, ci) = pooled(cbm);
    for &n in &spec.n_list {
        let samples =
            if n == run.config.zeta_n { run.zeta.clone() } else { ex::zeta_samples(run, n, run.config.zeta_replicates) };
        out.write(&format!("points_n{n}.csv"), |w| export::write_points(w, &samples))?;
        let (zs, zi) = pooled(&samples);
        let ks = ks_two_sample(&zs, &cs);
        table.push(json!({"n": n, "zeta_spacings": zs.len(), "cbm_spacings": cs.len(), "d": ks.d,
            "p_value": ks.p_value, "zeta_intensity": zi, "cbm_intensity": ci}));
        if n == GATED_N && n == run.config.zeta_n {
            verdicts.push(ex::criterion_10(run, cbm));
        } else {
            println!("info: n={n}: KS D={:.4} p={:.3}; intensity {zi:.4} vs {ci:.4}", ks.d, ks.p_value);
        }
    }
    out.note("comparison", Value::Array(table));
    Ok(verdicts)
}

pub fn compare(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let mut cfg = MainRunConfig { structure_steps: 0, block_instances: 0, in_block_target: 0, ..run_config(spec) };
    if let Some(r) = spec.replicates {
        cfg.zeta_replicates = r;
    }
    let run = ex::main_run(&cfg);
    let cbm = ex::cbm_time1_samples(&particle_config(spec));
    compare_tables(spec, &run, &cbm, out)
}

pub fn trajectories(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let mut cfg = ex::TrajectoryConfig {
        dist: spec.dist.clone(),
        seed: spec.seed,
        rule: spec.rule,
        burn_in: spec.burn_in,
        n: spec.n_list[0],
        horizon_cap: spec.horizon_cap,
        ..ex::TrajectoryConfig::default()
    };
    if let Some(r) = spec.replicates {
        cfg.replicates = r;
    }
    let run = ex::trajectory_run(&cfg);
    out.write("trajectories.csv", |w| export::write_planar(w, &run.samples))?;
    out.write("jumps.csv", |w| export::write_jumps(w, &run.graphs))?;
    let sigma = dist(spec).sigma();
    out.note("early_move_rate", json!({"mean": run.early_rate.0, "se": run.early_rate.1, "sigma": sigma}));
    println!(
        "info: moves per unit normalised time near position {}: {:.3} ± {:.3} (rho1/sigma at rho1 = 1/sqrt(pi): {:.3})",
        cfg.n,
        run.early_rate.0,
        run.early_rate.1,
        1.0 / (std::f64::consts::PI.sqrt() * sigma)
    );
    let chk = ex::coalescence_check(&spec.dist, spec.seed, spec.steps.min(10_000));
    Ok(vec![ex::criterion_8(&chk)])
}

pub fn all(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Vec<Verdict>> {
    let cfg = run_config(spec);
    let run = ex::main_run(&cfg);
    write_run_tables(&run, out)?;
    let mut verdicts = vec![ex::criterion_1(&run)];
    let ladder = ladder(spec, None, out)?;
    verdicts.push(ex::criterion_2(&run, ladder.rho1));
    verdicts.extend([ex::criterion_3(&run), ex::criterion_4(&run), ex::criterion_5(&run)]);
    verdicts.extend(q(spec, out)?);
    verdicts.extend(trajectories(spec, out)?);
    verdicts.extend(particles(spec, out)?);
    let cbm_samples = ex::cbm_time1_samples(&particle_config(spec));
    verdicts.extend(compare_tables(spec, &run, &cbm_samples, out)?);
    verdicts.push(ex::criterion_11(&run));
    verdicts.sort_by_key(|v| v.id);
    Ok(verdicts)
}
