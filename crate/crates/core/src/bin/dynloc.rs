use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dynloc::harness::{run_experiment, RunOptions};
use dynloc::params::{load_config, load_preset, parse_range, preset_names, Config, ExperimentKind};
use dynloc::{Error, Result};

#[derive(Parser)]
#[command(name = "dynloc", version, about = "Dynamical localization of a two-level ion in a Paul trap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master RNG seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration file.
    Run { config: PathBuf },
    /// Run a named preset (`--list` prints the names).
    Preset {
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
    /// Detuning sweep; `--delta start:stop:step`.
    Sweep {
        #[arg(long)]
        delta: String,
        config: PathBuf,
    },
    /// Floquet solution and matrix elements for a trap.
    FloquetTable {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 30)]
        nmax: usize,
        #[arg(long, default_value_t = 0.29)]
        kbar: f64,
        #[arg(long, default_value_t = 2.24)]
        omega0: f64,
    },
}

fn read_config(path: &PathBuf) -> Result<Config> {
    load_config(&std::fs::read_to_string(path)?)
}

fn floquet_config(a: f64, q: f64, nmax: usize, kbar: f64, omega0: f64) -> Result<Config> {
    let doc = serde_json::json!({
        "trap": { "a": a, "q": q, "omega0": omega0, "delta": 0.0, "kbar": kbar },
        "numerics": { "t_end": "pi", "window": [0.0, "pi"] },
        "experiment": { "type": "floquet", "n_max": nmax },
    });
    load_config(&doc.to_string())
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.command {
        Command::Run { config } => read_config(config)?,
        Command::Preset { list: true, .. } | Command::Preset { name: None, .. } => {
            for name in preset_names() {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Preset { name: Some(name), .. } => load_preset(name)?,
        Command::Sweep { delta, config } => {
            let mut c = read_config(config)?;
            c.experiment.sweep = parse_range(delta)
                .ok_or_else(|| Error::InvalidParameter {
                    field: "--delta".into(),
                    reason: format!("cannot read `{delta}` as start:stop:step"),
                })?;
            c.experiment.kind = ExperimentKind::Sweep;
            c
        }
        Command::FloquetTable {
            a,
            q,
            nmax,
            kbar,
            omega0,
        } => floquet_config(*a, *q, *nmax, *kbar, *omega0)?,
    };
    if let Some(seed) = cli.seed {
        config.numerics.seed = seed;
    }
    let opts = RunOptions {
        out_dir: Some(cli.out.clone()),
        workers: cli.workers,
    };
    let summary = run_experiment(&config, &opts)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynloc: {e}");
            ExitCode::FAILURE
        }
    }
}
