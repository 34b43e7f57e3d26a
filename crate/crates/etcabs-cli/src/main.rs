//! Batch front-end for the traffic-abstraction pipeline.
//!
//! Exit codes: 0 success, 1 configuration problem, 2 abstraction failure,
//! 3 validation violation.

mod config;
mod pipeline;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::pipeline::CliError;

#[derive(Parser)]
#[command(name = "etcabs", version, about = "Traffic abstraction for event-triggered control loops")]
struct Cli {
    /// Path to the JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory from the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to ETCABS_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Simulation seed (overrides simulation.seed from the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute bounds, flow pipes, and the timed automaton
    Abstract,
    /// Simulate seeded traffic traces of the concrete loop
    Simulate,
    /// Abstract, simulate, and replay the traces through the automaton
    Validate,
    /// Emit SVG charts and their underlying CSV data
    Plot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("config: --config PATH is required".into()))?;
    let cfg = RunConfig::from_path(config_path).map_err(CliError::Config)?;
    init_threads(cli.threads);
    let dir = pipeline::out_dir(&cfg, &cli.out);
    let seed = cli.seed.unwrap_or(cfg.simulation.seed);

    match cli.command {
        Command::Abstract => {
            let art = pipeline::run_abstraction(&cfg)?;
            pipeline::write_abstraction(&cfg, &art, &dir)?;
            println!(
                "abstracted {} regions, {} edges, epsilon = {}",
                art.partition.len(),
                art.quotient.automaton.edges.len(),
                art.quotient.automaton.epsilon
            );
            Ok(())
        }
        Command::Simulate => {
            let plant =
                cfg.plant().map_err(|e| CliError::Config(format!("config: plant: {e}")))?;
            let part = etcabs::isotropic_cover(plant.dim(), cfg.abstraction.m_bar)?;
            let traces = pipeline::simulate_batch(&cfg, &plant, &part, seed)?;
            pipeline::write_simulation(&cfg, &traces, plant.dim(), seed, &dir)?;
            println!(
                "simulated {} traces, {} events total",
                traces.len(),
                traces.iter().map(|t| t.trace.events.len()).sum::<usize>()
            );
            Ok(())
        }
        Command::Validate => {
            let art = pipeline::run_abstraction(&cfg)?;
            let traces = pipeline::simulate_batch(&cfg, &art.plant, &art.partition, seed)?;
            let report = pipeline::validate(&art, &traces)?;
            pipeline::write_validation(&report, &dir)?;
            println!(
                "validated {} traces: {} violations, coverage {:.3}",
                report.traces, report.violation_count, report.coverage_ratio
            );
            if report.violation_count > 0 {
                return Err(CliError::Validation(format!(
                    "{} of {} traces violate the abstraction",
                    report.violation_count, report.traces
                )));
            }
            Ok(())
        }
        Command::Plot => {
            let art = pipeline::run_abstraction(&cfg)?;
            let traces = pipeline::simulate_batch(&cfg, &art.plant, &art.partition, seed)?;
            plot::write_plots(
                &art.partition,
                &art.bounds,
                &art.quotient.automaton,
                &traces,
                &dir,
            )?;
            println!("plots written to {}", dir.display());
            Ok(())
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("ETCABS_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        // fails harmlessly if a pool already exists (e.g. under test)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
