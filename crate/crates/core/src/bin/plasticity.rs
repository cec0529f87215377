use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plasticity::runner::{self, parse_config, parse_sweep};

#[derive(Parser)]
#[command(version, about = "Continual-learning experiments on permuted MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write a CSV per seed.
    Run {
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides experiment.output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a hyper-parameter grid and pick the best cell.
    Sweep {
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Plot one metric from run CSVs as an SVG line chart.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> plasticity::Result<()> {
    match cmd {
        Command::Run { config, seed, out } => {
            let mut cfg = parse_config(&std::fs::read_to_string(&config)?)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(dir) = out {
                cfg.output = dir;
            }
            let dataset = runner::load_training_set(&cfg.data)?;
            for path in runner::run_all_seeds(&cfg, &dataset)? {
                println!("{}", path.display());
            }
        }
        Command::Sweep { spec, jobs } => {
            let spec = parse_sweep(&std::fs::read_to_string(&spec)?)?;
            let outcome = runner::run_sweep(&spec, jobs)?;
            for (cell, s) in outcome.cells.iter().zip(&outcome.summaries) {
                let settings: Vec<String> = cell.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "{}  auc {:.5} ± {:.5}  ok {} failed {}  {}",
                    s.name,
                    s.mean_auc,
                    s.stderr_auc,
                    s.completed,
                    s.failed,
                    settings.join(" ")
                );
            }
            match outcome.winner {
                Some(i) => println!("best: {}", outcome.summaries[i].name),
                None => println!("best: none (every cell had failures)"),
            }
            println!("summary: {}", outcome.summary_path.display());
        }
        Command::Plot { csv, metric, out } => {
            let series = runner::emit_plot(&csv, &metric, &out)?;
            println!("{} ({} systems)", out.display(), series.len());
        }
    }
    Ok(())
}
