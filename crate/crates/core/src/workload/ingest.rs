//! Reading and writing workloads and raw geo traces.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::model::{DemandMatrix, LiveVideo, Quality, RegionId, SlotIndex, VideoId, VideoMeta};

use super::{classify_bitrate, map_to_region, RegionCatalog, Workload, WorkloadError};

const LONG_FORM: [&str; 7] = [
    "video_id",
    "slot",
    "broadcast_region",
    "original_quality",
    "viewer_region",
    "requested_quality",
    "viewers",
];

/// Writes the long-form CSV, one row per demand entry. Videos without
/// viewers get a single zero-viewer row so they survive a round trip.
pub fn write_workload<W: Write>(out: W, workload: &Workload) -> Result<(), WorkloadError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LONG_FORM)?;
    for v in workload.videos() {
        let m = &v.meta;
        let mut row = |r: RegionId, q: Quality, p: u64| {
            w.write_record([
                m.id.0.to_string(),
                m.slot.0.to_string(),
                m.broadcast_region.0.to_string(),
                m.original_quality.label().to_string(),
                r.0.to_string(),
                q.label().to_string(),
                p.to_string(),
            ])
        };
        if v.demand.is_empty() {
            row(m.broadcast_region, m.original_quality, 0)?;
        }
        for (r, q, p) in v.demand.iter() {
            row(r, q, p)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(path: &Path, workload: &Workload) -> Result<(), WorkloadError> {
    write_workload(std::fs::File::create(path)?, workload)
}

fn columns<R: Read>(r: &mut csv::Reader<R>, names: &[&str]) -> Result<Vec<Option<usize>>, WorkloadError> {
    let headers = r.headers()?.clone();
    Ok(names
        .iter()
        .map(|n| headers.iter().position(|h| h.trim() == *n))
        .collect())
}

fn required(cols: &[Option<usize>], names: &[&str], k: usize) -> Result<usize, WorkloadError> {
    cols[k].ok_or_else(|| WorkloadError::MissingColumn(names[k].to_string()))
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<&'a str, WorkloadError> {
    rec.get(idx).map(str::trim).ok_or_else(|| WorkloadError::BadRow {
        line,
        message: format!("missing field {name}"),
    })
}

fn parse<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<T, WorkloadError> {
    s.parse().map_err(|_| WorkloadError::BadRow {
        line,
        message: format!("cannot parse {name} from {s:?}"),
    })
}

fn region(catalog: &RegionCatalog, s: &str, name: &str, line: u64) -> Result<RegionId, WorkloadError> {
    catalog.resolve(s).ok_or_else(|| WorkloadError::BadRow {
        line,
        message: format!("unknown {name} {s:?}"),
    })
}

#[derive(Default)]
struct Builder {
    metas: BTreeMap<VideoId, (VideoMeta, DemandMatrix)>,
}

impl Builder {
    fn add(&mut self, meta: VideoMeta, viewer: RegionId, mut q: Quality, p: u64, line: u64) -> Result<(), WorkloadError> {
        if q > meta.original_quality {
            log::warn!(
                "line {line}: video {} requests {q} above its original {}; clamped",
                meta.id,
                meta.original_quality
            );
            q = meta.original_quality;
        }
        let entry = self
            .metas
            .entry(meta.id)
            .or_insert_with(|| (meta.clone(), DemandMatrix::new()));
        if entry.0 != meta {
            return Err(WorkloadError::BadRow {
                line,
                message: format!("video {} disagrees with its earlier rows", meta.id),
            });
        }
        entry.1.add(viewer, q, p);
        Ok(())
    }

    fn finish(self, n_regions: usize) -> Result<Workload, WorkloadError> {
        let horizon = self.metas.values().map(|(m, _)| m.slot.0 as usize + 1).max().unwrap_or(0);
        let mut slots = vec![Vec::new(); horizon];
        for (_, (meta, demand)) in self.metas {
            let t = meta.slot.0 as usize;
            slots[t].push(LiveVideo::new(meta, demand, n_regions)?);
        }
        Ok(Workload { n_regions, slots })
    }
}

/// Parses the long-form CSV. Regions may be catalog names or indices.
pub fn read_workload<R: Read>(input: R, catalog: &RegionCatalog) -> Result<Workload, WorkloadError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let cols = columns(&mut r, &LONG_FORM)?;
    let idx: Vec<usize> = (0..LONG_FORM.len())
        .map(|k| required(&cols, &LONG_FORM, k))
        .collect::<Result<_, _>>()?;
    let mut b = Builder::default();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let f = |k: usize| field(&rec, idx[k], LONG_FORM[k], line);
        let meta = VideoMeta {
            id: VideoId(parse(f(0)?, "video_id", line)?),
            slot: SlotIndex(parse(f(1)?, "slot", line)?),
            broadcast_region: region(catalog, f(2)?, "broadcast_region", line)?,
            original_quality: parse(f(3)?, "original_quality", line)?,
        };
        let viewer = region(catalog, f(4)?, "viewer_region", line)?;
        let q: Quality = parse(f(5)?, "requested_quality", line)?;
        let p: u64 = parse(f(6)?, "viewers", line)?;
        b.add(meta, viewer, q, p, line)?;
    }
    b.finish(catalog.len())
}

pub fn ingest_csv(path: &Path, catalog: &RegionCatalog) -> Result<Workload, WorkloadError> {
    read_workload(std::fs::File::open(path)?, catalog)
}

const TRACE: [&str; 10] = [
    "video_id",
    "creation_time",
    "broadcaster_lat",
    "broadcaster_lon",
    "width",
    "height",
    "viewer_lat",
    "viewer_lon",
    "viewers",
    "requested_quality",
];

/// Reads a raw geo trace: one row per (video, viewer location) with the
/// broadcast's creation time in seconds from the horizon start and its frame
/// size. Videos are bucketed into hourly slots, locations are mapped to the
/// nearest site and frame sizes to quality classes. `requested_quality` is
/// optional and defaults to the original quality.
pub fn ingest_trace_csv(path: &Path, catalog: &RegionCatalog) -> Result<Workload, WorkloadError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(std::fs::File::open(path)?);
    let cols = columns(&mut r, &TRACE)?;
    let idx: Vec<usize> = (0..TRACE.len() - 1)
        .map(|k| required(&cols, &TRACE, k))
        .collect::<Result<_, _>>()?;
    let requested_col = cols[TRACE.len() - 1];
    let mut b = Builder::default();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let f = |k: usize| field(&rec, idx[k], TRACE[k], line);
        let created: f64 = parse(f(1)?, "creation_time", line)?;
        if !(created >= 0.0) {
            return Err(WorkloadError::BadRow {
                line,
                message: format!("negative creation_time {created}"),
            });
        }
        let geo = |a: usize, o: usize| -> Result<RegionId, WorkloadError> {
            let lat: f64 = parse(f(a)?, TRACE[a], line)?;
            let lon: f64 = parse(f(o)?, TRACE[o], line)?;
            map_to_region(lat, lon, catalog).map_err(|e| WorkloadError::BadRow {
                line,
                message: e.to_string(),
            })
        };
        let qb = classify_bitrate(parse(f(4)?, "width", line)?, parse(f(5)?, "height", line)?).map_err(|e| {
            WorkloadError::BadRow {
                line,
                message: e.to_string(),
            }
        })?;
        let meta = VideoMeta {
            id: VideoId(parse(f(0)?, "video_id", line)?),
            slot: SlotIndex((created / 3600.0).floor() as u32),
            broadcast_region: geo(2, 3)?,
            original_quality: qb,
        };
        let viewer = geo(6, 7)?;
        let q = match requested_col.and_then(|c| rec.get(c)).map(str::trim) {
            Some(s) if !s.is_empty() => parse(s, "requested_quality", line)?,
            _ => qb,
        };
        b.add(meta, viewer, q, parse(f(8)?, "viewers", line)?, line)?;
    }
    b.finish(catalog.len())
}
