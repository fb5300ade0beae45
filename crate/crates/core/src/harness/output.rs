//! Output directory layout.
//!
//! ```text
//! out/regions.csv prices.csv rtt.csv workload.csv config.txt
//! out/D{d}/plans_transcode.csv plans_serving.csv slot_objectives.csv
//!          instance_series.csv dataset.csv scores.csv selected.csv
//!          reservations.csv
//! out/D{d}/diss{x}/metrics.csv placements_{ALG}.csv served_{ALG}.csv
//! out/report/hourly_D{d}_diss{x}_{ALG}.csv totals.csv ordering.csv gain.csv
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::forecast::ReservationPlan;
use crate::io::{self, IoError};
use crate::workload;

use super::{region_dataset, DelayModels, DelayRun, ExperimentConfig, GridMetrics, HarnessError, Inputs, Phase2, Report};

pub fn delay_dir(out: &Path, delay: f64) -> PathBuf {
    out.join(format!("D{delay}"))
}

pub fn diss_dir(out: &Path, delay: f64, diss: f64) -> PathBuf {
    delay_dir(out, delay).join(format!("diss{diss}"))
}

fn mkdir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Creates `path` and hands a buffered writer to `f`.
fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), IoError>) -> Result<(), HarnessError> {
    let wrap = |source: IoError| HarnessError::File {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|e| wrap(e.into()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(wrap)?;
    w.flush().map_err(|e| wrap(e.into()))
}

pub fn write_inputs(out: &Path, cfg: &ExperimentConfig, inputs: &Inputs) -> Result<(), HarnessError> {
    mkdir(out)?;
    let cat = Some(&inputs.catalog);
    with_file(&out.join("regions.csv"), |w| io::write_catalog(w, &inputs.catalog))?;
    with_file(&out.join("prices.csv"), |w| io::write_price_book(w, &inputs.cloud.prices, cat))?;
    with_file(&out.join("rtt.csv"), |w| io::write_rtt(w, &inputs.cloud.rtt, cat))?;
    with_file(&out.join("workload.csv"), |w| {
        workload::write_workload(w, &inputs.workload).map_err(IoError::from)
    })?;
    with_file(&out.join("config.txt"), |w| Ok(w.write_all(cfg.to_text().as_bytes())?))
}

pub fn write_optimization(out: &Path, run: &DelayRun) -> Result<(), HarnessError> {
    let dir = delay_dir(out, run.delay);
    mkdir(&dir)?;
    with_file(&dir.join("plans_transcode.csv"), |w| io::write_transcode_plans(w, &run.solutions))?;
    with_file(&dir.join("plans_serving.csv"), |w| io::write_serving_plans(w, &run.solutions))?;
    with_file(&dir.join("slot_objectives.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["slot", "objective", "instances"])?;
        for s in &run.solutions {
            c.write_record([s.slot.0.to_string(), s.objective.to_string(), s.total_instances().to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    with_file(&dir.join("instance_series.csv"), |w| io::write_instance_series(w, &run.series))
}

/// Supervised rows of the fitting period: `region,target_slot,split`, the
/// lagged counts oldest first, then the target.
pub fn write_dataset(out: &Path, cfg: &ExperimentConfig, run: &DelayRun, fit_end: usize) -> Result<(), HarnessError> {
    let dir = delay_dir(out, run.delay);
    mkdir(&dir)?;
    let mut sets = Vec::new();
    for s in &run.series {
        let sets_for = region_dataset(cfg, s, fit_end).map_err(|source| HarnessError::Forecast {
            delay: run.delay,
            region: s.region(),
            source,
        })?;
        sets.push((s.region(), s.start().0 as usize, sets_for));
    }
    with_file(&dir.join("dataset.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["region".to_string(), "target_slot".into(), "split".into()];
        header.extend((1..=cfg.window).rev().map(|k| format!("lag{k}")));
        header.push("target".into());
        c.write_record(&header)?;
        for (region, start, (train, test)) in &sets {
            let mut offset = start + cfg.window;
            for (label, set) in [("train", train), ("test", test)] {
                for (x, y) in set.inputs.iter().zip(&set.targets) {
                    let mut row = vec![region.0.to_string(), offset.to_string(), label.to_string()];
                    row.extend(x.iter().map(f64::to_string));
                    row.push(y.to_string());
                    c.write_record(&row)?;
                    offset += 1;
                }
            }
        }
        c.flush()?;
        Ok(())
    })
}

pub fn write_models(out: &Path, models: &DelayModels) -> Result<(), HarnessError> {
    let dir = delay_dir(out, models.delay);
    mkdir(&dir)?;
    with_file(&dir.join("scores.csv"), |w| io::write_scores(w, &models.scores))?;
    with_file(&dir.join("selected.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["region", "model"])?;
        for ((r, _), name) in models.scores.iter().zip(&models.selected) {
            c.write_record([r.0.to_string(), name.clone()])?;
        }
        c.flush()?;
        Ok(())
    })
}

pub fn write_reservations(out: &Path, delay: f64, plan: &ReservationPlan) -> Result<(), HarnessError> {
    let dir = delay_dir(out, delay);
    mkdir(&dir)?;
    with_file(&dir.join("reservations.csv"), |w| io::write_reservations(w, plan))
}

pub fn write_phase2(out: &Path, cfg: &ExperimentConfig, p2: &Phase2) -> Result<(), HarnessError> {
    for point in &p2.grid {
        let m = &point.metrics;
        let dir = diss_dir(out, m.delay, m.diss);
        mkdir(&dir)?;
        with_file(&dir.join("metrics.csv"), |w| io::write_metrics(w, &m.rows))?;
        if cfg.write_outcomes {
            for alg in &cfg.algorithms {
                let of = || point.outcomes.iter().filter(|o| o.algorithm == *alg);
                with_file(&dir.join(format!("placements_{}.csv", alg.label())), |w| {
                    io::write_outcome_placements(w, of())
                })?;
                with_file(&dir.join(format!("served_{}.csv", alg.label())), |w| io::write_outcome_served(w, of()))?;
            }
        }
    }
    Ok(())
}

/// Reads back every `metrics.csv` of the configured grid.
pub fn read_grid_metrics(out: &Path, cfg: &ExperimentConfig) -> Result<Vec<GridMetrics>, HarnessError> {
    let mut grid = Vec::new();
    for &delay in &cfg.delay_grid {
        for &diss in &cfg.diss_grid {
            let path = diss_dir(out, delay, diss).join("metrics.csv");
            let file = File::open(&path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            let rows = io::read_metrics(file).map_err(|source| HarnessError::File { path, source })?;
            grid.push(GridMetrics { delay, diss, rows });
        }
    }
    Ok(grid)
}

fn opt_flag(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

pub fn write_report(out: &Path, report: &Report) -> Result<(), HarnessError> {
    let dir = out.join("report");
    mkdir(&dir)?;
    for (delay, diss, alg, rows) in &report.hourly {
        let name = format!("hourly_D{delay}_diss{diss}_{}.csv", alg.label());
        with_file(&dir.join(name), |w| io::write_metrics(w, rows))?;
    }
    with_file(&dir.join("totals.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "delay_ms",
            "diss_pct",
            "algorithm",
            "hours",
            "total_cost",
            "mean_latency_ms",
            "mean_hit_pct",
            "mean_on_demand_pct",
            "mean_diss_pct",
            "unserved",
        ])?;
        for t in &report.totals {
            c.write_record([
                t.delay.to_string(),
                t.diss.to_string(),
                t.algorithm.label().to_string(),
                t.hours.to_string(),
                t.total_cost.to_string(),
                t.mean_latency_ms.to_string(),
                t.mean_hit_pct.to_string(),
                t.mean_on_demand_pct.to_string(),
                t.mean_diss_pct.to_string(),
                t.unserved.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    with_file(&dir.join("ordering.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["delay_ms", "diss_pct", "slot", "gnca_le_gca", "gca_le_gmc"])?;
        for o in &report.ordering {
            c.write_record([
                o.delay.to_string(),
                o.diss.to_string(),
                o.slot.0.to_string(),
                opt_flag(o.gnca_le_gca),
                opt_flag(o.gca_le_gmc),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    with_file(&dir.join("gain.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["delay_ms", "diss_pct", "gnca_cost", "gmc_cost", "ratio"])?;
        for g in &report.gain {
            c.write_record([
                g.delay.to_string(),
                g.diss.to_string(),
                g.gnca_cost.to_string(),
                g.gmc_cost.to_string(),
                g.ratio.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })
}
