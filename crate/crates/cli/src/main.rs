use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use lowrank_vp::diagnostics::{parse_config, run_simulation, RunOutput, SimulationConfig};
use lowrank_vp::stepper::TruncationMode;

/// Low-rank Vlasov-Poisson solver.
#[derive(Parser, Debug)]
#[command(name = "lrvp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation described by a `key = value` config file.
    Solve {
        config: PathBuf,
        /// Replace a config entry, e.g. `--override eps=1e-3`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VAL")]
        overrides: Vec<String>,
        /// Run conservative and plain truncation into `<outdir>/conservative`
        /// and `<outdir>/plain`.
        #[arg(long)]
        compare: bool,
        /// Output directory; takes precedence over the config's `outdir`.
        #[arg(long, value_name = "DIR")]
        outdir: Option<PathBuf>,
    },
}

fn summary(label: &str, out: &RunOutput) {
    let last = out.records.last();
    log::info!(
        "{label}: {} steps, dt = {:.4e}, wall {:.1} s, mass dev {:.2e}, energy dev {:.2e}, max rank {}",
        out.steps_done,
        out.dt,
        out.wall_time.as_secs_f64(),
        last.map_or(0.0, |r| r.mass_dev),
        last.map_or(0.0, |r| r.energy_dev),
        last.map_or(0, |r| r.ranks.max()),
    );
}

fn run(cfg: &SimulationConfig, label: &str) -> anyhow::Result<()> {
    log::info!("{label}: {} -> {}", cfg.problem, cfg.outdir.display());
    let out = run_simulation(cfg).with_context(|| format!("{label} run aborted"))?;
    summary(label, &out);
    Ok(())
}

fn solve(
    config: PathBuf,
    overrides: Vec<String>,
    compare: bool,
    outdir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut cfg = parse_config(&config, &overrides)
        .with_context(|| format!("reading {}", config.display()))?;
    if let Some(dir) = outdir {
        cfg.outdir = dir;
    }
    if !compare {
        return run(&cfg, "run");
    }
    let base = cfg.outdir.clone();
    let mut failed = Vec::new();
    for (mode, name) in [
        (TruncationMode::Conservative, "conservative"),
        (TruncationMode::Plain, "plain"),
    ] {
        let c = SimulationConfig {
            truncation: mode,
            outdir: base.join(name),
            ..cfg.clone()
        };
        // Keep going so the pair is as complete as possible.
        if let Err(e) = run(&c, name) {
            log::error!("{e:#}");
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        anyhow::bail!("compare: {} run(s) aborted", failed.join(" and "));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            config,
            overrides,
            compare,
            outdir,
        } => solve(config, overrides, compare, outdir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
