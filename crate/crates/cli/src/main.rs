//! `wavefront`: command line front end for the queue-wave experiments.

mod commands;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::Outputs;
use spec::ExperimentSpec;

#[derive(Parser)]
#[command(name = "wavefront", version, about = "Spatial queue waves and their coalescing Brownian limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Run the queue, write wave records and a configuration snapshot.
    Simulate,
    /// Tail frequencies of W(t) from the records written by `simulate`.
    Tail,
    /// Walk-maximum probabilities, envelope and goodness rates.
    Q,
    /// Block comparisons and conditional spacing tests.
    Blocks,
    /// Coalescing particle reference: density ladder, scaling, time-1 clusters.
    Cbm,
    /// Long-wave times against time-1 particle positions.
    Compare,
    /// Individual trajectories, G graphs and the coalescence identity.
    Trajectories,
    /// Every experiment, sharing one long run.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Tail => "tail",
            Command::Q => "q",
            Command::Blocks => "blocks",
            Command::Cbm => "cbm",
            Command::Compare => "compare",
            Command::Trajectories => "trajectories",
            Command::All => "all",
        }
    }
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// `key = value` file; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true)]
    burn_in: Option<String>,
    /// uniform:a,b | twopoint:a,b | tri:a,m,b | atoms:v:w,... (rescaled to unit mean)
    #[arg(long, global = true)]
    dist: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// Replicate count of the command's main experiment.
    #[arg(long, global = true)]
    replicates: Option<String>,
    #[arg(long, global = true)]
    horizon_cap: Option<String>,
    /// Comma-separated thresholds for the rescaled point processes.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Comma-separated ranks j for the tail estimate.
    #[arg(long, global = true)]
    j_grid: Option<String>,
    /// Comma-separated j:y pairs for q(j, y).
    #[arg(long, global = true)]
    q_grid: Option<String>,
    /// Stopping test: `own` (the customer's own new position) or `predecessor`.
    #[arg(long, global = true)]
    rule: Option<String>,
}

fn build_spec(flags: &Flags) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &flags.config {
        spec.apply_file(path)?;
    }
    let given = [
        ("seed", &flags.seed),
        ("steps", &flags.steps),
        ("burn-in", &flags.burn_in),
        ("dist", &flags.dist),
        ("out", &flags.out),
        ("replicates", &flags.replicates),
        ("horizon-cap", &flags.horizon_cap),
        ("n", &flags.n),
        ("j-grid", &flags.j_grid),
        ("q-grid", &flags.q_grid),
        ("rule", &flags.rule),
    ];
    let mut errors: Vec<String> =
        given.iter().filter_map(|(k, v)| v.as_deref().and_then(|v| spec.set(k, v).err())).collect();
    errors.extend(spec.problems());
    if !errors.is_empty() {
        bail!("invalid experiment spec:\n  {}", errors.join("\n  "));
    }
    Ok(spec)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WAVEFRONT_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("WAVEFRONT_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let spec = build_spec(&cli.flags)?;
    let mut out = Outputs::new(&spec.out)?;
    let start = Instant::now();
    let verdicts = match cli.command {
        Command::Simulate => commands::simulate(&spec, &mut out),
        Command::Tail => commands::tail(&spec, &mut out),
        Command::Q => commands::q(&spec, &mut out),
        Command::Blocks => commands::blocks(&spec, &mut out),
        Command::Cbm => commands::cbm(&spec, &mut out),
        Command::Compare => commands::compare(&spec, &mut out),
        Command::Trajectories => commands::trajectories(&spec, &mut out),
        Command::All => commands::all(&spec, &mut out),
    }?;
    for v in &verdicts {
        println!("{v}");
    }
    let name = cli.command.name();
    std::fs::write(out.dir.join("run.conf"), spec.to_conf())?;
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": spec.seed,
        "spec": spec.to_conf(),
        "float_env": "IEEE 754 binary64, round to nearest; CSV floats as {:.16e}",
        "outputs": out.files,
        "verdicts": verdicts,
        "wall_secs": start.elapsed().as_secs_f64(),
        "extra": out.extra,
    });
    std::fs::write(out.dir.join(format!("manifest-{name}.json")), serde_json::to_string_pretty(&manifest)?)?;
    Ok(verdicts.iter().all(|v| v.pass))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
