use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ltadmm::runner::{preset, run_experiment, ExperimentConfig, Manifest, RunnerError};
use ltadmm::stepsize::certified_run_check;

#[derive(Parser)]
#[command(name = "ltadmm", version, about = "Local-training ADMM experiments on simulated peer-to-peer networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Replace the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Replace the output directory of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the theoretical step-size bounds for a configuration and
    /// print the report as JSON.
    Certify {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in experiment: `comparison` (variant comparison across cost
    /// ratios) or `tau_sweep` (local-step sweep).
    Preset {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Print the preset configuration as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
    },
}

fn apply(mut config: ExperimentConfig, overrides: &Overrides) -> Result<ExperimentConfig, RunnerError> {
    if let Some(seed) = overrides.seed {
        config.algorithm.master_seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn report(manifest: &Manifest) {
    for g in &manifest.grid {
        let stop = match g.stopping {
            Some(s) => format!("threshold at k={} time={}", s.k, s.model_time),
            None => "threshold not reached".to_string(),
        };
        let last = g.final_grad_norm_sq.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{}: gamma={} completed={}/{} final_grad_norm_sq={} {}",
            g.label,
            g.point.gamma,
            g.completed,
            g.completed + g.diverged,
            last,
            stop
        );
    }
    println!("wrote {}", manifest.config.output.dir.display());
}

fn execute(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let config = apply(ExperimentConfig::load(&config)?, &overrides)?;
            report(&run_experiment(&config, overrides.workers)?);
        }
        Command::Certify { config, seed } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                config.algorithm.master_seed = seed;
            }
            let topology = config.topology()?;
            let instance = config.problem.build(topology.num_agents(), 0)?;
            let grid = config.grid()?;
            let reports: Vec<_> = grid
                .iter()
                .map(|point| certified_run_check(&instance, &topology, &config.run_config(point)))
                .collect();
            let json = if reports.len() == 1 { serde_json::to_string_pretty(&reports[0]) } else { serde_json::to_string_pretty(&reports) };
            println!("{}", json.expect("report serializes"));
        }
        Command::Preset { name, overrides, print_config } => {
            let default_out = PathBuf::from("results").join(&name);
            let config = apply(preset(&name, &default_out)?, &overrides)?;
            if print_config {
                print!("{}", config.to_toml());
            } else {
                report(&run_experiment(&config, overrides.workers)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
