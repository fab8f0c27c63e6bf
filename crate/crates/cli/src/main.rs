use std::path::PathBuf;
use std::process::ExitCode;

use ambiscatter_cli::config::{validate_config, ExperimentConfig, Normalized};
use ambiscatter_cli::experiment::{
    echo_config, run_classification, run_experiment, RunError, Stage,
};
use ambiscatter_cli::presets;
use clap::{Args, Parser, Subcommand};

/// Traffic-aware ambient backscatter experiments.
#[derive(Parser)]
#[command(name = "ambiscatter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify PUs by traffic pattern and estimate pattern parameters.
    Classify(Common),
    /// Analytic outage and coverage over the sweep.
    Analyze(Common),
    /// Monte Carlo outage and coverage over the sweep.
    Simulate(Common),
    /// Full pipeline: classification, analysis, simulation and selection.
    Sweep(Common),
    /// Check a config and print its normalized form.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
}

fn config_error(message: String) -> RunError {
    RunError::Config(vec![ambiscatter_cli::FieldError {
        field: "config".into(),
        message,
    }])
}

fn load(args: &Common) -> Result<Normalized, RunError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => presets::preset(name)
            .ok_or_else(|| {
                config_error(format!(
                    "unknown preset {name}; available: {}",
                    presets::names().collect::<Vec<_>>().join(", ")
                ))
            })?
            .to_string(),
        (None, None) => "{}".to_string(),
    };
    let mut raw = ExperimentConfig::from_json(&text).map_err(|e| config_error(e.to_string()))?;
    if let Some(seed) = args.seed {
        raw.seed = seed;
    }
    if let Some(trials) = args.trials {
        raw.trials = trials;
    }
    validate_config(&raw).map_err(RunError::Config)
}

fn run(command: Command) -> Result<(), RunError> {
    let (stage, args) = match command {
        Command::Validate(args) => {
            let cfg = load(&args)?;
            println!("{}", cfg.to_json());
            if args.config.is_some() || args.preset.is_some() {
                echo_config(&cfg, &args.out)?;
            }
            return Ok(());
        }
        Command::Classify(args) => {
            let cfg = load(&args)?;
            for path in run_classification(&cfg, &args.out)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
        Command::Analyze(args) => (Stage::Analyze, args),
        Command::Simulate(args) => (Stage::Simulate, args),
        Command::Sweep(args) => (Stage::Full, args),
    };
    let cfg = load(&args)?;
    let path = run_experiment(&cfg, &args.out, stage)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
