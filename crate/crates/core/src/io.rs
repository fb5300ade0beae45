//! CSV readers and writers for every tabular artifact.
//!
//! Region columns are written as indices, except in the price, delay and
//! catalog tables which carry names. Readers accept either form.

use std::io::{Read, Write};

use thiserror::Error;

use crate::allocator::{Algorithm, SlotMetrics, SlotOutcome};
use crate::forecast::{CandidateScore, InstanceSeries, ReservationPlan};
use crate::model::{ModelError, RegionId, RttMatrix, SlotIndex, VideoId};
use crate::num::Scalar;
use crate::optimizer::SlotSolution;
use crate::pricing::{PriceBook, PricingError};
use crate::workload::{RegionCatalog, RegionInfo, WorkloadError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("expected header {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

/// Region naming used by readers: catalog names or plain indices.
#[derive(Clone, Copy)]
pub enum Regions<'a> {
    Catalog(&'a RegionCatalog),
    Indexed(usize),
}

impl Regions<'_> {
    fn resolve(&self, token: &str, line: u64) -> Result<RegionId, IoError> {
        let found = match self {
            Regions::Catalog(c) => c.resolve(token),
            Regions::Indexed(n) => token.trim().parse::<usize>().ok().filter(|i| i < n).map(RegionId),
        };
        found.ok_or_else(|| IoError::BadRow {
            line,
            message: format!("unknown region {token:?}"),
        })
    }
}

fn reader<R: Read>(input: R, expected: &[&str]) -> Result<csv::Reader<R>, IoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found.len() < expected.len() || found.iter().zip(expected).any(|(f, e)| f != e) {
        return Err(IoError::BadHeader {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(r)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, IoError> {
    let s = rec.get(i).unwrap_or("");
    s.parse().map_err(|_| IoError::BadRow {
        line,
        message: format!("cannot parse column {} from {s:?}", i + 1),
    })
}

fn scalar<S: Scalar>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<S, IoError> {
    num::<f64>(rec, i, line).map(S::lit)
}

fn name(catalog: Option<&RegionCatalog>, r: RegionId) -> String {
    match catalog {
        Some(c) if r.0 < c.len() => c.get(r).name.clone(),
        _ => r.0.to_string(),
    }
}

pub fn write_catalog<W: Write>(out: W, catalog: &RegionCatalog) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "name", "lat", "lon"])?;
    for (id, r) in catalog.iter() {
        w.write_record([id.0.to_string(), r.name.clone(), r.lat.to_string(), r.lon.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_catalog<R: Read>(input: R) -> Result<RegionCatalog, IoError> {
    let mut r = reader(input, &["region", "name", "lat", "lon"])?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let idx: usize = num(&rec, 0, line)?;
        if idx != out.len() {
            return Err(IoError::BadRow {
                line,
                message: format!("region indices must be dense and ordered, got {idx}"),
            });
        }
        out.push(RegionInfo {
            name: rec.get(1).unwrap_or("").to_string(),
            lat: num(&rec, 2, line)?,
            lon: num(&rec, 3, line)?,
        });
    }
    Ok(RegionCatalog::new(out)?)
}

pub fn write_price_book<S: Scalar, W: Write>(out: W, prices: &PriceBook<S>, catalog: Option<&RegionCatalog>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "zeta", "mu", "eta", "omega"])?;
    for i in 0..prices.len() {
        let r = RegionId(i);
        w.write_record([
            name(catalog, r),
            prices.zeta(r).to_string(),
            prices.mu(r).to_string(),
            prices.eta(r).to_string(),
            prices.omega(r).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows may come in any order but must cover every region once.
pub fn read_price_book<S: Scalar, R: Read>(input: R, regions: Regions<'_>) -> Result<PriceBook<S>, IoError> {
    let mut r = reader(input, &["region", "zeta", "mu", "eta", "omega"])?;
    let mut rows: Vec<(RegionId, [S; 4])> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let id = regions.resolve(rec.get(0).unwrap_or(""), line)?;
        let vals = [
            scalar(&rec, 1, line)?,
            scalar(&rec, 2, line)?,
            scalar(&rec, 3, line)?,
            scalar(&rec, 4, line)?,
        ];
        if rows.iter().any(|(r, _)| *r == id) {
            return Err(IoError::BadRow {
                line,
                message: format!("region {} listed twice", id.0),
            });
        }
        rows.push((id, vals));
    }
    rows.sort_by_key(|(r, _)| *r);
    if rows.iter().enumerate().any(|(i, (r, _))| r.0 != i) {
        return Err(IoError::BadRow {
            line: 0,
            message: "price table does not cover every region".into(),
        });
    }
    let col = |k: usize| rows.iter().map(|(_, v)| v[k]).collect::<Vec<S>>();
    Ok(PriceBook::new(col(0), col(1), col(2), col(3))?)
}

pub fn write_rtt<S: Scalar, W: Write>(out: W, rtt: &RttMatrix<S>, catalog: Option<&RegionCatalog>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["region".to_string()];
    header.extend(rtt.regions().map(|r| name(catalog, r)));
    w.write_record(&header)?;
    for (i, row) in rtt.rows().into_iter().enumerate() {
        let mut rec = vec![name(catalog, RegionId(i))];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Square table whose header row and first column list the same regions in
/// index order.
pub fn read_rtt<S: Scalar, R: Read>(input: R, regions: Regions<'_>) -> Result<RttMatrix<S>, IoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    for (i, h) in header.iter().enumerate().skip(1) {
        if regions.resolve(h, 1)?.0 != i - 1 {
            return Err(IoError::BadRow {
                line: 1,
                message: format!("column {h:?} out of index order"),
            });
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if regions.resolve(rec.get(0).unwrap_or(""), line)?.0 != rows.len() {
            return Err(IoError::BadRow {
                line,
                message: "rows out of index order".into(),
            });
        }
        rows.push((1..rec.len()).map(|i| scalar(&rec, i, line)).collect::<Result<Vec<S>, _>>()?);
    }
    Ok(RttMatrix::new(rows)?)
}

pub fn write_instance_series<W: Write>(out: W, series: &[InstanceSeries]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "region", "count"])?;
    let len = series.iter().map(InstanceSeries::len).max().unwrap_or(0);
    for i in 0..len {
        for s in series {
            if let Some(&c) = s.counts().get(i) {
                let slot = s.start().0 + i as u32;
                w.write_record([slot.to_string(), s.region().0.to_string(), c.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One series per region `0..n`, each contiguous.
pub fn read_instance_series<R: Read>(input: R, n_regions: usize) -> Result<Vec<InstanceSeries>, IoError> {
    let mut r = reader(input, &["slot", "region", "count"])?;
    let mut per: Vec<Vec<(u32, u64)>> = vec![Vec::new(); n_regions];
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let slot: u32 = num(&rec, 0, line)?;
        let region = Regions::Indexed(n_regions).resolve(rec.get(1).unwrap_or(""), line)?;
        per[region.0].push((slot, num(&rec, 2, line)?));
    }
    per.into_iter()
        .enumerate()
        .map(|(i, mut rows)| {
            rows.sort_by_key(|r| r.0);
            let start = rows.first().map(|r| r.0).unwrap_or(0);
            if rows.iter().enumerate().any(|(k, r)| r.0 != start + k as u32) {
                return Err(IoError::BadRow {
                    line: 0,
                    message: format!("region {i}: slots are not contiguous"),
                });
            }
            Ok(InstanceSeries::new(
                RegionId(i),
                SlotIndex(start),
                rows.into_iter().map(|r| r.1).collect(),
            ))
        })
        .collect()
}

pub fn write_reservations<W: Write>(out: W, plan: &ReservationPlan) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "region", "reserved"])?;
    for (slot, counts) in plan.iter() {
        for (r, c) in counts.iter().enumerate() {
            w.write_record([slot.0.to_string(), r.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_reservations<R: Read>(input: R, n_regions: usize) -> Result<ReservationPlan, IoError> {
    let mut r = reader(input, &["slot", "region", "reserved"])?;
    let mut slots: std::collections::BTreeMap<u32, Vec<Option<u64>>> = Default::default();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let slot: u32 = num(&rec, 0, line)?;
        let region = Regions::Indexed(n_regions).resolve(rec.get(1).unwrap_or(""), line)?;
        slots.entry(slot).or_insert_with(|| vec![None; n_regions])[region.0] = Some(num(&rec, 2, line)?);
    }
    let mut plan = ReservationPlan::new(n_regions);
    for (slot, counts) in slots {
        let counts: Option<Vec<u64>> = counts.into_iter().collect();
        let counts = counts.ok_or_else(|| IoError::BadRow {
            line: 0,
            message: format!("slot {slot} does not list every region"),
        })?;
        plan.insert(SlotIndex(slot), counts);
    }
    Ok(plan)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Scores of every candidate, region by region. Missing values are empty.
pub fn write_scores<W: Write>(out: W, scores: &[(RegionId, Vec<CandidateScore>)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "model", "r2", "mae"])?;
    for (r, list) in scores {
        for s in list {
            w.write_record([r.0.to_string(), s.name.clone(), opt(s.r2), opt(s.mae)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Transcoding placements of every plan, slot after slot. Video ids are
/// unique across slots so no slot column is needed.
pub fn write_transcode_plans<'a, S: Scalar + 'a, W: Write>(
    out: W,
    solutions: impl IntoIterator<Item = &'a SlotSolution<S>>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "quality", "transcode_region"])?;
    for sol in solutions {
        for (id, plan) in &sol.plans {
            for &(q, r) in &plan.placements {
                w.write_record([id.0.to_string(), q.label().to_string(), r.0.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_serving_plans<'a, S: Scalar + 'a, W: Write>(
    out: W,
    solutions: impl IntoIterator<Item = &'a SlotSolution<S>>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "quality", "viewer_region", "serving_region"])?;
    for sol in solutions {
        for (id, plan) in &sol.plans {
            for (&(q, viewer), &s) in &plan.assignments {
                w.write_record([id.0.to_string(), q.label().to_string(), viewer.0.to_string(), s.0.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_outcome_placements<'a, W: Write>(
    out: W,
    outcomes: impl IntoIterator<Item = &'a SlotOutcome>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "quality", "region", "kind"])?;
    for outcome in outcomes {
        for (id, q, r, k) in outcome.placements() {
            w.write_record([id.0.to_string(), q.label().to_string(), r.0.to_string(), k.label().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Unserved demands have an empty serving region.
pub fn write_outcome_served<'a, W: Write>(
    out: W,
    outcomes: impl IntoIterator<Item = &'a SlotOutcome>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "quality", "viewer_region", "serving_region", "satisfied"])?;
    for outcome in outcomes {
        for d in &outcome.demands {
            w.write_record([
                d.video.0.to_string(),
                d.quality.label().to_string(),
                d.viewer_region.0.to_string(),
                d.serving_region.map(|r| r.0.to_string()).unwrap_or_default(),
                d.satisfied.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const METRICS_HEADER: [&str; 8] = [
    "slot",
    "algorithm",
    "total_cost",
    "avg_latency_ms",
    "hit_pct",
    "on_demand_pct",
    "diss_pct",
    "unserved",
];

pub fn write_metrics<S: Scalar, W: Write>(out: W, rows: &[SlotMetrics<S>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for m in rows {
        w.write_record([
            m.slot.0.to_string(),
            m.algorithm.label().to_string(),
            m.total_cost.to_string(),
            m.avg_latency_ms.to_string(),
            m.hit_pct.to_string(),
            m.on_demand_pct.to_string(),
            m.diss_pct.to_string(),
            m.unserved.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<S: Scalar, R: Read>(input: R) -> Result<Vec<SlotMetrics<S>>, IoError> {
    let mut r = reader(input, &METRICS_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let algorithm: Algorithm = rec.get(1).unwrap_or("").parse().map_err(|e: crate::allocator::AllocatorError| {
            IoError::BadRow {
                line,
                message: e.to_string(),
            }
        })?;
        out.push(SlotMetrics {
            slot: SlotIndex(num(&rec, 0, line)?),
            algorithm,
            total_cost: scalar(&rec, 2, line)?,
            avg_latency_ms: scalar(&rec, 3, line)?,
            hit_pct: scalar(&rec, 4, line)?,
            on_demand_pct: scalar(&rec, 5, line)?,
            diss_pct: scalar(&rec, 6, line)?,
            unserved: num(&rec, 7, line)?,
        });
    }
    Ok(out)
}

/// Per-video plan rows keyed by id, for reading plan dumps back in tests.
pub fn read_transcode_plans<R: Read>(input: R, n_regions: usize) -> Result<Vec<(VideoId, crate::model::Quality, RegionId)>, IoError> {
    let mut r = reader(input, &["video_id", "quality", "transcode_region"])?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let q = rec.get(1).unwrap_or("").parse().map_err(|e: ModelError| IoError::BadRow {
            line,
            message: e.to_string(),
        })?;
        out.push((
            VideoId(num(&rec, 0, line)?),
            q,
            Regions::Indexed(n_regions).resolve(rec.get(2).unwrap_or(""), line)?,
        ));
    }
    Ok(out)
}
