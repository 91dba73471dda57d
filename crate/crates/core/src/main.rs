use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use topgrid::app::{self, THREADS_ENV};
use topgrid::io::config::RunConfig;
use topgrid::Result;

#[derive(Parser)]
#[command(
    name = "topgrid",
    version,
    about = "Top-view occupancy grids from calibrated cameras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a configured set of streams.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a synthetic scenario with calibrations and ground truth.
    Synth {
        /// Scenario name or TOML file.
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure throughput on a configured set of streams.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long, default_value_t = 30)]
        measure: usize,
    },
}

fn load(path: &Path) -> Result<(RunConfig, usize)> {
    let cfg = RunConfig::load(path)?;
    if cfg.streams_differ() {
        eprintln!(
            "warning: streams have different lengths {:?}; processing the first {} frames",
            cfg.stream_lengths, cfg.frame_count
        );
    }
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => app::parse_threads(&v)?,
        Err(_) => cfg.threads,
    };
    Ok((cfg, threads))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let (cfg, threads) = load(&config)?;
            let s = app::run(&cfg, threads)?;
            println!(
                "processed {} frames at {:.2} fps into {}",
                s.frames,
                s.fps,
                s.output.display()
            );
        }
        Command::Synth { scenario, out, seed } => {
            let mut s = app::load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            let r = app::synth(&s, &out)?;
            println!(
                "wrote {} frames from {} cameras of `{}`; run with {}",
                r.frames,
                r.cameras,
                r.scenario,
                r.config.display()
            );
        }
        Command::Bench {
            config,
            warmup,
            measure,
        } => {
            let (cfg, threads) = load(&config)?;
            println!("{}", app::bench(&cfg, threads, warmup, measure)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
