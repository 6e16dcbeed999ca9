use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use photon_memory::scenario::{registry, run_file, RunOptions, ScenarioFile, OUT_ENV};

/// Optimal photon storage in Λ-type media: scenario runner.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario from a JSON config or a built-in name (see list-scenarios).
    Run {
        config: String,
        /// Output root; results go to OUT/<scenario name>/.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Seed for multi-start jitter (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Multiplies every default grid density.
        #[arg(long, default_value_t = 1.0)]
        grid_scale: f64,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the built-in scenarios.
    ListScenarios {
        /// Print each scenario's JSON config as well.
        #[arg(long)]
        json: bool,
    },
    /// Check a JSON config without running it.
    Validate { config: PathBuf },
}

fn load(config: &str) -> anyhow::Result<ScenarioFile> {
    let path = PathBuf::from(config);
    if path.is_file() {
        return ScenarioFile::load(&path).with_context(|| format!("loading {config}"));
    }
    if registry::NAMES.contains(&config) {
        return Ok(registry::scenario(config)?);
    }
    anyhow::bail!("{config} is neither a config file nor a built-in scenario ({})", registry::NAMES.join(", "))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seed, grid_scale, jobs } => {
            let file = load(&config)?;
            let opts = RunOptions { out_root: out, seed, grid_scale, jobs };
            let report = run_file(&file, &opts)?;
            let failed = report.table.rows.iter().filter(|r| !r.converged).count();
            for f in &report.files {
                println!("{}", f.display());
            }
            if failed > 0 {
                log::warn!("{failed} of {} points did not converge (flagged in the CSV)", report.table.rows.len());
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ListScenarios { json } => {
            for f in registry::all() {
                println!("{:<8} {}", f.name(), f.description());
                if json {
                    println!("{}", f.to_json()?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let file = ScenarioFile::load(&config)?;
            println!("{}: ok ({})", config.display(), file.name());
            Ok(ExitCode::SUCCESS)
        }
    }
}
