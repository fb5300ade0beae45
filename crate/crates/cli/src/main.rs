//! Command-line driver for the allocation experiments.
//!
//! Every subcommand recomputes its upstream stages from the configuration,
//! so each one can run on a clean output directory. On failure a single JSON
//! line `{"error":{"kind":...,"message":...}}` goes to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crowdcast::harness::{self, ExperimentConfig, GridMetrics, HarnessError};

#[derive(Parser)]
#[command(name = "crowdcast", version, about = "Live-stream transcoding and delivery allocation experiments")]
struct Cli {
    /// Key = value configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Writes the region tables and the workload.
    GenWorkload,
    /// Solves every slot offline for each delay threshold.
    Optimize,
    /// Writes the supervised forecasting windows.
    BuildDataset,
    /// Fits and selects forecasters and writes the reservation plans.
    Forecast,
    /// Replays the evaluation window with every enabled algorithm.
    Simulate,
    /// Builds summary tables from the metrics already in the output directory.
    Report,
    /// Runs every stage.
    All,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = load_config(cli)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::GenWorkload => {
            let inputs = harness::load_inputs(&cfg)?;
            harness::write_inputs(&out, &cfg, &inputs)?;
        }
        Command::Optimize => {
            let inputs = harness::load_inputs(&cfg)?;
            harness::write_inputs(&out, &cfg, &inputs)?;
            for run in harness::optimize_all(&cfg, &inputs)? {
                harness::write_optimization(&out, &run)?;
            }
        }
        Command::BuildDataset => {
            let inputs = harness::load_inputs(&cfg)?;
            let test_start = harness::check_horizon(&cfg, inputs.workload.horizon())?;
            harness::write_inputs(&out, &cfg, &inputs)?;
            for run in harness::optimize_all(&cfg, &inputs)? {
                harness::write_optimization(&out, &run)?;
                harness::write_dataset(&out, &cfg, &run, test_start)?;
            }
        }
        Command::Forecast => {
            let p1 = harness::run_phase1(&cfg)?;
            harness::write_inputs(&out, &cfg, &p1.inputs)?;
            let horizon = p1.inputs.workload.horizon();
            for (run, models) in p1.runs.iter().zip(&p1.models) {
                harness::write_optimization(&out, run)?;
                harness::write_dataset(&out, &cfg, run, p1.test_start)?;
                harness::write_models(&out, models)?;
                let plan = harness::plan_reservations(&cfg, run, models, p1.test_start, horizon)?;
                harness::write_reservations(&out, run.delay, &plan)?;
            }
        }
        Command::Simulate => {
            let p1 = harness::run_phase1(&cfg)?;
            let p2 = harness::run_phase2(&cfg, &p1)?;
            harness::write_inputs(&out, &cfg, &p1.inputs)?;
            for ((run, models), plan) in p1.runs.iter().zip(&p1.models).zip(&p2.reservations) {
                harness::write_optimization(&out, run)?;
                harness::write_dataset(&out, &cfg, run, p1.test_start)?;
                harness::write_models(&out, models)?;
                harness::write_reservations(&out, run.delay, plan)?;
            }
            harness::write_phase2(&out, &cfg, &p2)?;
        }
        Command::Report => {
            let grid: Vec<GridMetrics> = harness::read_grid_metrics(&out, &cfg)?;
            if grid.iter().all(|g| g.rows.is_empty()) {
                return Err(HarnessError::Invalid("no metrics rows to report".into()));
            }
            harness::write_report(&out, &harness::emit_report(&grid))?;
        }
        Command::All => {
            let report = harness::run_all(&cfg)?;
            for g in &report.gain {
                log::info!("delay {} ms, diss {}%: GNCA/GMC cost ratio {:.4}", g.delay, g.diss, g.ratio);
            }
        }
    }
    log::info!("wrote {}", out.display());
    Ok(())
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::from(1)
        }
    }
}
