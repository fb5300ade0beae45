//! End-to-end experiment driver.
//!
//! Phase 1 solves every slot offline for each delay threshold, turns the
//! optimal instance counts into per-region series and fits one forecaster
//! per region. Phase 2 replays the evaluation window hour by hour: each
//! slot gets reservations from the forecaster (or the true optimum in
//! oracle mode) and every enabled algorithm allocates it on its own ledger.

mod config;
mod output;
mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::allocator::{
    allocate_slot, compute_slot_metrics, AllocatorConfig, AllocatorError, CapacityLedger, SlotMetrics,
    SlotOutcome,
};
use crate::forecast::{
    default_candidates, reservation_pipeline, CandidateScore, ForecastError, Forecaster, InstanceSeries, MlpConfig,
    ReservationPlan, SupervisedWindowSet,
};
use crate::io::{self, IoError, Regions};
use crate::model::{RegionId, SlotIndex};
use crate::optimizer::{aggregate_instance_counts, solve_slot, OptimizerConfig, OptimizerError, SlotSolution};
use crate::pricing::{CloudModel, PricingError};
use crate::workload::{self, RegionCatalog, Workload, WorkloadConfig, WorkloadError};
use crate::defaults;

pub use config::{ExperimentConfig, ForecastLead, ReservationMode, WorkloadSource};
pub use output::{
    delay_dir, diss_dir, read_grid_metrics, write_dataset, write_inputs, write_models, write_optimization,
    write_phase2, write_report, write_reservations,
};
pub use report::{emit_report, GainRow, OrderingRow, Report, TotalsRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: IoError },
    #[error("delay {delay} ms, slot {slot}: {source}")]
    Optimizer {
        delay: f64,
        slot: SlotIndex,
        source: OptimizerError,
    },
    #[error("delay {delay} ms, region {region}: {source}")]
    Forecast {
        delay: f64,
        region: RegionId,
        source: ForecastError,
    },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Allocator(#[from] AllocatorError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config { .. } => "config",
            HarnessError::Io { .. } | HarnessError::File { .. } => "io",
            HarnessError::Optimizer { source, .. } => match source {
                OptimizerError::Infeasible { .. } => "infeasible",
                _ => "optimizer",
            },
            HarnessError::Forecast { .. } => "forecast",
            HarnessError::Workload(_) => "workload",
            HarnessError::Allocator(_) => "allocator",
            HarnessError::Pricing(_) => "pricing",
            HarnessError::Invalid(_) => "invalid",
        }
    }
}

/// Applies `f` to every item on scoped worker threads; results keep input
/// order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let mut parts: Vec<Vec<(usize, R)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|k| {
                s.spawn(move || {
                    (k..items.len())
                        .step_by(workers)
                        .map(|i| (i, f(&items[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    for part in parts.drain(..) {
        for (i, r) in part {
            out[i] = Some(r);
        }
    }
    out.into_iter().map(|r| r.expect("every index mapped")).collect()
}

pub struct Inputs {
    pub catalog: RegionCatalog,
    pub cloud: CloudModel<f64>,
    pub workload: Workload,
}

fn open(path: &PathBuf) -> Result<std::fs::File, HarnessError> {
    std::fs::File::open(path).map_err(|e| HarnessError::Io {
        path: path.clone(),
        source: e,
    })
}

fn file_err(path: &PathBuf) -> impl Fn(IoError) -> HarnessError + '_ {
    move |e| HarnessError::File {
        path: path.clone(),
        source: e,
    }
}

/// Region catalog, cloud tables and workload as configured. A price table
/// read from file keeps its own reserved prices.
pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Inputs, HarnessError> {
    let catalog = match &cfg.catalog {
        Some(p) => io::read_catalog(open(p)?).map_err(file_err(p))?,
        None => defaults::catalog(),
    };
    let rtt = match &cfg.rtt {
        Some(p) => io::read_rtt(open(p)?, Regions::Catalog(&catalog)).map_err(file_err(p))?,
        None => defaults::rtt(),
    };
    let prices = match &cfg.price_book {
        Some(p) => io::read_price_book(open(p)?, Regions::Catalog(&catalog)).map_err(file_err(p))?,
        None => defaults::price_book(cfg.reserved_discount),
    };
    let cloud = CloudModel::new(rtt, prices, Default::default())?;
    let n = cloud.n_regions();
    let workload = match &cfg.workload {
        WorkloadSource::Generate => {
            let mut wc = WorkloadConfig::default_for(n);
            wc.horizon = cfg.horizon;
            wc.seed = cfg.seed;
            wc.mean_viewers = cfg.mean_viewers;
            wc.zipf_exponent = cfg.zipf_exponent;
            wc.locality = cfg.locality;
            wc.videos_per_hour.iter_mut().for_each(|v| *v *= cfg.video_scale);
            workload::generate(&wc)?
        }
        WorkloadSource::File(p) => workload::ingest_csv(p, &catalog)?,
        WorkloadSource::Trace(p) => workload::ingest_trace_csv(p, &catalog)?,
    };
    if workload.n_regions != n {
        return Err(HarnessError::Invalid(format!(
            "workload covers {} regions, cloud tables {n}",
            workload.n_regions
        )));
    }
    Ok(Inputs {
        catalog,
        cloud,
        workload,
    })
}

/// Offline optimum of every slot at one delay threshold.
pub struct DelayRun {
    pub delay: f64,
    pub solutions: Vec<SlotSolution<f64>>,
    pub series: Vec<InstanceSeries>,
}

pub fn optimize_all(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<Vec<DelayRun>, HarnessError> {
    let slots: Vec<usize> = (0..inputs.workload.horizon()).collect();
    cfg.delay_grid
        .iter()
        .map(|&delay| {
            let ocfg = OptimizerConfig {
                node_limit: cfg.node_limit,
                ..OptimizerConfig::with_threshold(delay)
            };
            let solved = par_map(&slots, |&t| {
                let slot = SlotIndex(t as u32);
                solve_slot(slot, inputs.workload.slot(slot), &inputs.cloud, &ocfg)
                    .map_err(|source| HarnessError::Optimizer { delay, slot, source })
            });
            let solutions = solved.into_iter().collect::<Result<Vec<_>, _>>()?;
            let series = aggregate_instance_counts(&solutions, inputs.cloud.n_regions()).map_err(|source| {
                HarnessError::Optimizer {
                    delay,
                    slot: SlotIndex(0),
                    source,
                }
            })?;
            log::info!("delay {delay} ms: solved {} slots", solutions.len());
            Ok(DelayRun {
                delay,
                solutions,
                series,
            })
        })
        .collect()
}

/// Supervised windows of one region's fitting period, split into train and
/// test rows.
pub fn region_dataset(
    cfg: &ExperimentConfig,
    series: &InstanceSeries,
    fit_end: usize,
) -> Result<(SupervisedWindowSet<f64>, SupervisedWindowSet<f64>), ForecastError> {
    let values: Vec<f64> = series.values()[..fit_end.min(series.len())].to_vec();
    SupervisedWindowSet::from_values(&values, cfg.window)?.split(cfg.train_fraction)
}

/// Selected forecaster and candidate scores per region.
pub struct DelayModels {
    pub delay: f64,
    pub models: Vec<Box<dyn Forecaster<f64>>>,
    pub selected: Vec<String>,
    pub scores: Vec<(RegionId, Vec<CandidateScore>)>,
}

pub fn fit_models(cfg: &ExperimentConfig, run: &DelayRun, fit_end: usize) -> Result<DelayModels, HarnessError> {
    let fitted = par_map(&run.series, |series| {
        let region = series.region();
        let err = |source| HarnessError::Forecast {
            delay: run.delay,
            region,
            source,
        };
        let (train, test) = region_dataset(cfg, series, fit_end).map_err(err)?;
        let mlp = MlpConfig {
            epochs: cfg.mlp_epochs,
            seed: cfg.seed.wrapping_mul(1_000_003).wrapping_add(region.0 as u64),
            ..MlpConfig::default()
        };
        crate::forecast::select_model(default_candidates(cfg.window, &mlp), &train, &test).map_err(err)
    });
    let mut out = DelayModels {
        delay: run.delay,
        models: Vec::new(),
        selected: Vec::new(),
        scores: Vec::new(),
    };
    for (series, sel) in run.series.iter().zip(fitted) {
        let sel = sel?;
        log::info!(
            "delay {} ms, region {}: selected {}",
            run.delay,
            series.region(),
            sel.scores[sel.index].name
        );
        out.selected.push(sel.scores[sel.index].name.clone());
        out.scores.push((series.region(), sel.scores));
        out.models.push(sel.model);
    }
    Ok(out)
}

/// Reserved counts for every evaluation slot.
pub fn plan_reservations(
    cfg: &ExperimentConfig,
    run: &DelayRun,
    models: &DelayModels,
    test_start: usize,
    horizon: usize,
) -> Result<ReservationPlan, HarnessError> {
    let mut plan = ReservationPlan::new(run.series.len());
    let steps = cfg.forecast_lead.steps();
    let refs: Vec<&dyn Forecaster<f64>> = models.models.iter().map(|m| m.as_ref()).collect();
    for t in test_start..horizon {
        let slot = SlotIndex(t as u32);
        let counts = match cfg.reservations {
            ReservationMode::Oracle => run.series.iter().map(|s| s.at(slot).unwrap_or(0)).collect(),
            ReservationMode::Forecast => {
                let known = SlotIndex((t + 1 - steps) as u32);
                let history: Vec<InstanceSeries> = run.series.iter().map(|s| s.until(known)).collect();
                reservation_pipeline(&history, &refs, cfg.window, steps).map_err(|source| HarnessError::Forecast {
                    delay: run.delay,
                    region: RegionId(0),
                    source,
                })?
            }
        };
        plan.insert(slot, counts);
    }
    Ok(plan)
}

pub struct Phase1 {
    pub inputs: Inputs,
    pub runs: Vec<DelayRun>,
    pub models: Vec<DelayModels>,
    pub test_start: usize,
}

/// Checks that the horizon leaves room for warm-up, fitting and evaluation.
pub fn check_horizon(cfg: &ExperimentConfig, horizon: usize) -> Result<usize, HarnessError> {
    let test_start = cfg.test_start(horizon);
    let rows = test_start.saturating_sub(cfg.window);
    let cut = (rows as f64 * cfg.train_fraction).floor() as usize;
    if horizon <= cfg.test_hours || test_start < cfg.window + 2 || cut == 0 || cut >= rows || rows - cut < 2 {
        return Err(HarnessError::Invalid(format!(
            "horizon of {horizon} slots is too short for window {} and {} test hours",
            cfg.window, cfg.test_hours
        )));
    }
    Ok(test_start)
}

pub fn run_phase1(cfg: &ExperimentConfig) -> Result<Phase1, HarnessError> {
    let inputs = load_inputs(cfg)?;
    let test_start = check_horizon(cfg, inputs.workload.horizon())?;
    let runs = optimize_all(cfg, &inputs)?;
    let models = runs
        .iter()
        .map(|r| fit_models(cfg, r, test_start))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Phase1 {
        inputs,
        runs,
        models,
        test_start,
    })
}

/// Hourly metrics of one `(delay, diss)` grid point, all algorithms.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMetrics {
    pub delay: f64,
    pub diss: f64,
    pub rows: Vec<SlotMetrics<f64>>,
}

pub struct GridPoint {
    pub metrics: GridMetrics,
    /// Parallel to `metrics.rows`.
    pub outcomes: Vec<SlotOutcome>,
}

pub struct Phase2 {
    pub reservations: Vec<ReservationPlan>,
    pub grid: Vec<GridPoint>,
}

/// Allocates every evaluation slot with each algorithm on a fresh ledger.
pub fn simulate_grid_point(
    cfg: &ExperimentConfig,
    inputs: &Inputs,
    reservations: &ReservationPlan,
    delay: f64,
    diss: f64,
) -> Result<GridPoint, HarnessError> {
    let mut acfg = AllocatorConfig::new(delay, diss)?;
    acfg.guard = cfg.diss_guard;
    let n = inputs.cloud.n_regions();
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &alg in &cfg.algorithms {
        for (slot, reserved) in reservations.iter() {
            let stock = if alg.uses_reservations() { reserved.to_vec() } else { vec![0; n] };
            let mut ledger = CapacityLedger::new(stock, cfg.on_demand_limit);
            let videos = inputs.workload.slot(slot);
            let outcome = allocate_slot(alg, slot, videos, &mut ledger, &inputs.cloud, &acfg)?;
            rows.push(compute_slot_metrics(&outcome, videos, &ledger, &inputs.cloud));
            outcomes.push(outcome);
        }
    }
    Ok(GridPoint {
        metrics: GridMetrics { delay, diss, rows },
        outcomes,
    })
}

pub fn run_phase2(cfg: &ExperimentConfig, p1: &Phase1) -> Result<Phase2, HarnessError> {
    let horizon = p1.inputs.workload.horizon();
    let reservations = p1
        .runs
        .iter()
        .zip(&p1.models)
        .map(|(run, models)| plan_reservations(cfg, run, models, p1.test_start, horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(usize, f64)> = (0..p1.runs.len())
        .flat_map(|i| cfg.diss_grid.iter().map(move |&x| (i, x)))
        .collect();
    let grid = par_map(&points, |&(i, diss)| {
        simulate_grid_point(cfg, &p1.inputs, &reservations[i], p1.runs[i].delay, diss)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(Phase2 { reservations, grid })
}


/// Runs both phases and the report, writing every artifact under
/// `cfg.out_dir`.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    let p1 = run_phase1(cfg)?;
    write_inputs(out, cfg, &p1.inputs)?;
    for (run, models) in p1.runs.iter().zip(&p1.models) {
        write_optimization(out, run)?;
        write_dataset(out, cfg, run, p1.test_start)?;
        write_models(out, models)?;
    }
    let p2 = run_phase2(cfg, &p1)?;
    for (run, plan) in p1.runs.iter().zip(&p2.reservations) {
        write_reservations(out, run.delay, plan)?;
    }
    write_phase2(out, cfg, &p2)?;
    let grid: Vec<GridMetrics> = p2.grid.into_iter().map(|g| g.metrics).collect();
    let report = emit_report(&grid);
    write_report(out, &report)?;
    Ok(report)
}
