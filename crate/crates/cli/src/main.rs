use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use scope_lab::config::ExperimentConfig;
use scope_lab::experiment::{run_experiment, write_checks, ExperimentError};
use scope_lab::plot::emit_plot;
use scope_lab_core::verify::run_identity_suite;

const CONFIG_ERROR: u8 = 1;
const VERIFY_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "scope-lab", version, about = "Seeded loss-comparison experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Maximum number of trials run at once.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the loss identity and gradient checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw one column of a metrics CSV as an SVG line chart.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &PathBuf, out: Option<PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    cfg.apply_seed_env()?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn run(config: PathBuf, jobs: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load_config(&config, out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    match run_experiment(&cfg, jobs) {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "{} {} (max error {:e}, tolerance {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_error,
                    c.tolerance
                );
            }
            println!("results in {}", report.out_dir.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(VERIFY_FAILED)
            }
        }
        Err(e @ ExperimentError::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn verify(seed: u64) -> ExitCode {
    let checks: Vec<_> = run_identity_suite(seed).into_iter().map(|c| (seed, c)).collect();
    if let Err(e) = write_checks(&checks, std::io::stdout().lock()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    if checks.iter().all(|(_, c)| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(VERIFY_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CONFIG_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run { config, jobs, out } => run(config, jobs, out),
        Command::Verify { seed } => verify(seed),
        Command::Plot { csv, column, out } => match emit_plot(&csv, &column, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
    }
}
