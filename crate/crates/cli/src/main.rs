use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use optoforce::output::OutputDir;
use optoforce::{exit, execute, load_config, CliError, Subcommand};

/// Atom-in-a-focused-beam simulations: classical trajectories, quantum
/// wavepackets, analytic forces and demon ensembles.
#[derive(Debug, Parser)]
#[command(name = "optoforce", version)]
struct Args {
    #[arg(value_enum)]
    command: Subcommand,

    /// TOML configuration file, layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Built-in starting configuration.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(optoforce::presets::NAMES))]
    preset: Option<String>,

    /// Override one field, e.g. `--set atom.mass=1e-30`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory; defaults to `output.dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps and ensembles; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,

    /// Ensemble seed, same as `--set ensemble.seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("ensemble.seed={seed}"));
    }
    let cfg = match load_config(args.config.as_deref(), args.preset.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": "RuntimeError", "message": e.to_string() }));
            return ExitCode::from(exit::IO as u8);
        }
    };
    let out_path = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let result = OutputDir::create(&out_path).and_then(|mut out| pool.install(|| execute(args.command, &cfg, &mut out, workers)));
    match result {
        Ok(report) => {
            println!("{}", serde_json::to_string(&report.metadata["summary"]).unwrap_or_default());
            match report.gate_failure {
                Some(g) => fail(&g),
                None => ExitCode::from(exit::SUCCESS as u8),
            }
        }
        Err(e) => fail(&e),
    }
}
