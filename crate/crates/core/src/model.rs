//! Domain types for videos, regions, delays and placement plans.
//!
//! Everything here is an immutable value once constructed. Demand existence
//! (whether a quality is requested in a region) is always derived from the
//! viewer counts and never stored on its own.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::num::{bits_key, Scalar};

/// Largest region count supported; placement keys are packed into `u128`.
pub const MAX_REGIONS: usize = 32;

/// Intra-region serving delay used when no RTT table is supplied, in ms.
pub const LOCAL_FLOOR_MS: f64 = 8.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown quality label {0:?}")]
    UnknownQuality(String),
    #[error("data volumes must be strictly positive and increasing with quality")]
    BadLadder,
    #[error("rtt matrix: {0}")]
    BadRtt(String),
    #[error("video {video}: demand for {quality} exceeds original quality {original}")]
    QualityAboveOriginal {
        video: VideoId,
        quality: Quality,
        original: Quality,
    },
    #[error("video {video}: region {region} out of range (n = {n})")]
    RegionOutOfRange {
        video: VideoId,
        region: RegionId,
        n: usize,
    },
    #[error("assignment for ({quality}, viewers in {viewer}) has no matching demand")]
    AssignmentWithoutDemand { quality: Quality, viewer: RegionId },
    #[error("demand ({quality}, viewers in {viewer}) has no serving assignment")]
    MissingAssignment { quality: Quality, viewer: RegionId },
}

/// One rung of the bitrate ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quality {
    P240,
    P360,
    P480,
    P720,
}

impl Quality {
    pub const ALL: [Quality; 4] = [Quality::P240, Quality::P360, Quality::P480, Quality::P720];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Quality> {
        Self::ALL.get(i).copied()
    }

    /// Nominal frame height in pixels.
    pub fn height(self) -> u32 {
        match self {
            Quality::P240 => 240,
            Quality::P360 => 360,
            Quality::P480 => 480,
            Quality::P720 => 720,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quality::P240 => "240p",
            Quality::P360 => "360p",
            Quality::P480 => "480p",
            Quality::P720 => "720p",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Quality {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_end_matches(['p', 'P']);
        match t {
            "240" => Ok(Quality::P240),
            "360" => Ok(Quality::P360),
            "480" => Ok(Quality::P480),
            "720" => Ok(Quality::P720),
            _ => Err(ModelError::UnknownQuality(s.to_string())),
        }
    }
}

/// Per-hour data volume of each quality, in GB.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityLadder<S> {
    kappa: [S; 4],
}

impl<S: Scalar> QualityLadder<S> {
    pub fn new(kappa: [S; 4]) -> Result<Self, ModelError> {
        let positive = kappa.iter().all(|&k| k > S::zero() && k.is_finite());
        let increasing = kappa.windows(2).all(|w| w[0] < w[1]);
        if positive && increasing {
            Ok(Self { kappa })
        } else {
            Err(ModelError::BadLadder)
        }
    }

    pub fn kappa(&self, q: Quality) -> S {
        self.kappa[q.index()]
    }
}

impl<S: Scalar> Default for QualityLadder<S> {
    /// Volumes of a one-hour stream at 240p/360p/480p/720p.
    fn default() -> Self {
        Self {
            kappa: [0.405, 0.495, 0.603, 0.738].map(S::lit),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(pub usize);

impl RegionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SlotIndex(pub u32);

impl fmt::Display for SlotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VideoId(pub u64);

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Round-trip delays between regions, in milliseconds. `get(a, b)` is the
/// delay for serving viewers in `b` from a copy hosted in `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct RttMatrix<S> {
    n: usize,
    d: Vec<S>,
}

impl<S: Scalar> RttMatrix<S> {
    pub fn new(rows: Vec<Vec<S>>) -> Result<Self, ModelError> {
        let n = rows.len();
        if n == 0 {
            return Err(ModelError::BadRtt("at least one region required".into()));
        }
        if n > MAX_REGIONS {
            return Err(ModelError::BadRtt(format!(
                "{n} regions exceeds the supported maximum of {MAX_REGIONS}"
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(ModelError::BadRtt(format!("row {i} is not of length {n}")));
        }
        let d: Vec<S> = rows.into_iter().flatten().collect();
        if d.iter().any(|&x| !(x >= S::zero()) || !x.is_finite()) {
            return Err(ModelError::BadRtt("delays must be finite and non-negative".into()));
        }
        for i in 0..n {
            let diag = d[i * n + i];
            for j in 0..n {
                if diag > d[i * n + j] || diag > d[j * n + i] {
                    return Err(ModelError::BadRtt(format!(
                        "local delay of region {i} exceeds a cross-region delay involving {j}"
                    )));
                }
            }
        }
        Ok(Self { n, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, from: RegionId, to: RegionId) -> S {
        self.d[from.0 * self.n + to.0]
    }

    pub fn local(&self, r: RegionId) -> S {
        self.get(r, r)
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> {
        (0..self.n).map(RegionId)
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.d.chunks(self.n).map(|c| c.to_vec()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoMeta {
    pub id: VideoId,
    pub slot: SlotIndex,
    pub broadcast_region: RegionId,
    pub original_quality: Quality,
}

/// Viewer counts per (viewer region, requested quality). Zero entries are not
/// stored, so `exists` is exactly "count > 0".
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DemandMatrix {
    counts: BTreeMap<(RegionId, Quality), u64>,
}

impl DemandMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a matrix from `(region, quality, viewers)` triples, summing
    /// duplicates and dropping zeros.
    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (RegionId, Quality, u64)>,
    {
        let mut m = Self::new();
        for (r, q, p) in entries {
            m.add(r, q, p);
        }
        m
    }

    pub fn add(&mut self, region: RegionId, quality: Quality, viewers: u64) {
        if viewers > 0 {
            *self.counts.entry((region, quality)).or_insert(0) += viewers;
        }
    }

    pub fn get(&self, region: RegionId, quality: Quality) -> u64 {
        self.counts.get(&(region, quality)).copied().unwrap_or(0)
    }

    pub fn exists(&self, region: RegionId, quality: Quality) -> bool {
        self.get(region, quality) > 0
    }

    pub fn total_viewers(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Demanded pairs in ascending (region, quality) order.
    pub fn iter(&self) -> impl Iterator<Item = (RegionId, Quality, u64)> + '_ {
        self.counts.iter().map(|(&(r, q), &p)| (r, q, p))
    }

    pub fn pair_count(&self) -> usize {
        self.counts.len()
    }

    pub fn qualities(&self) -> BTreeSet<Quality> {
        self.counts.keys().map(|&(_, q)| q).collect()
    }

    pub fn max_quality(&self) -> Option<Quality> {
        self.counts.keys().map(|&(_, q)| q).max()
    }

    pub fn check_against(&self, meta: &VideoMeta, n_regions: usize) -> Result<(), ModelError> {
        for (r, q, _) in self.iter() {
            if q > meta.original_quality {
                return Err(ModelError::QualityAboveOriginal {
                    video: meta.id,
                    quality: q,
                    original: meta.original_quality,
                });
            }
            if r.0 >= n_regions {
                return Err(ModelError::RegionOutOfRange {
                    video: meta.id,
                    region: r,
                    n: n_regions,
                });
            }
        }
        if meta.broadcast_region.0 >= n_regions {
            return Err(ModelError::RegionOutOfRange {
                video: meta.id,
                region: meta.broadcast_region,
                n: n_regions,
            });
        }
        Ok(())
    }
}

/// A video together with its demand: the unit of work for the optimizer and
/// the online allocators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveVideo {
    pub meta: VideoMeta,
    pub demand: DemandMatrix,
}

impl LiveVideo {
    pub fn new(meta: VideoMeta, demand: DemandMatrix, n_regions: usize) -> Result<Self, ModelError> {
        demand.check_against(&meta, n_regions)?;
        Ok(Self { meta, demand })
    }

    pub fn id(&self) -> VideoId {
        self.meta.id
    }

    pub fn total_viewers(&self) -> u64 {
        self.demand.total_viewers()
    }
}

/// Where each quality of one video is transcoded, and which site serves each
/// regional demand.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AllocationPlan {
    /// `(quality, region)` pairs hosting a transcoded copy.
    pub placements: BTreeSet<(Quality, RegionId)>,
    /// `(quality, viewer region)` to serving region.
    pub assignments: BTreeMap<(Quality, RegionId), RegionId>,
}

impl AllocationPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, q: Quality, r: RegionId) -> bool {
        self.placements.insert((q, r))
    }

    pub fn assign(&mut self, q: Quality, viewer: RegionId, serving: RegionId) {
        self.assignments.insert((q, viewer), serving);
    }

    pub fn placement_count(&self) -> usize {
        self.placements.len()
    }

    pub fn serving(&self, q: Quality, viewer: RegionId) -> Option<RegionId> {
        self.assignments.get(&(q, viewer)).copied()
    }

    /// Number of placements per region, for an `n`-region system.
    pub fn instances_per_region(&self, n: usize) -> Vec<u64> {
        let mut out = vec![0; n];
        for &(_, r) in &self.placements {
            out[r.0] += 1;
        }
        out
    }
}

/// Structural constraint labels of the placement problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// The original quality must be hosted in the broadcaster's region.
    OriginalHosted,
    /// A demand can only be served from a site that hosts its quality.
    ServedFromPlacement,
    /// Only existing demands may be served.
    ServeOnlyDemanded,
    /// Every existing demand is served by exactly one site.
    ServeEveryDemand,
    /// No placement above the original quality.
    NoUpscale,
}

impl Constraint {
    pub fn code(self) -> &'static str {
        match self {
            Constraint::OriginalHosted => "5a",
            Constraint::ServedFromPlacement => "5b",
            Constraint::ServeOnlyDemanded => "5c",
            Constraint::ServeEveryDemand => "5d",
            Constraint::NoUpscale => "5e",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.constraint, self.detail)
    }
}

/// Checks the structural constraints of `plan`. An empty result means the
/// plan is well-formed for this video.
pub fn validate_plan(plan: &AllocationPlan, video: &VideoMeta, demand: &DemandMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    let qb = video.original_quality;
    let rb = video.broadcast_region;

    if !plan.placements.contains(&(qb, rb)) {
        out.push(Violation {
            constraint: Constraint::OriginalHosted,
            detail: format!("missing placement ({qb}, region {rb})"),
        });
    }
    for (&(q, w), &s) in &plan.assignments {
        if !plan.placements.contains(&(q, s)) {
            out.push(Violation {
                constraint: Constraint::ServedFromPlacement,
                detail: format!("({q}, viewers {w}) served from region {s} without placement"),
            });
        }
    }
    for &(q, w) in plan.assignments.keys() {
        if !demand.exists(w, q) {
            out.push(Violation {
                constraint: Constraint::ServeOnlyDemanded,
                detail: format!("({q}, viewers {w}) assigned but not demanded"),
            });
        }
    }
    for (w, q, _) in demand.iter() {
        if !plan.assignments.contains_key(&(q, w)) {
            out.push(Violation {
                constraint: Constraint::ServeEveryDemand,
                detail: format!("({q}, viewers {w}) demanded but unassigned"),
            });
        }
    }
    for &(q, r) in &plan.placements {
        if q > qb {
            out.push(Violation {
                constraint: Constraint::NoUpscale,
                detail: format!("placement ({q}, region {r}) above original {qb}"),
            });
        }
    }
    out
}

/// Viewer-weighted mean delay over all demands of one video, in ms. Zero
/// when the video has no viewers.
///
/// Viewers are grouped by exact delay value before weighting, so a video
/// served entirely at one delay reports that delay bit-for-bit.
pub fn avg_latency<S: Scalar>(
    plan: &AllocationPlan,
    demand: &DemandMatrix,
    rtt: &RttMatrix<S>,
) -> Result<S, ModelError> {
    for &(q, w) in plan.assignments.keys() {
        if !demand.exists(w, q) {
            return Err(ModelError::AssignmentWithoutDemand { quality: q, viewer: w });
        }
    }
    let total = demand.total_viewers();
    if total == 0 {
        return Ok(S::zero());
    }
    let mut groups: HashMap<(u64, i16, i8), (S, u64)> = HashMap::new();
    for (w, q, p) in demand.iter() {
        let s = plan
            .serving(q, w)
            .ok_or(ModelError::MissingAssignment { quality: q, viewer: w })?;
        let d = rtt.get(s, w);
        groups.entry(bits_key(d)).or_insert((d, 0)).1 += p;
    }
    Ok(weighted_mean(groups.into_values(), total))
}

/// `sum(d * c / total)` with groups visited in delay order for a stable sum.
pub(crate) fn weighted_mean<S: Scalar>(groups: impl Iterator<Item = (S, u64)>, total: u64) -> S {
    let mut gs: Vec<(S, u64)> = groups.collect();
    gs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let t = S::from_count(total);
    gs.into_iter()
        .map(|(d, c)| if c == total { d } else { d * (S::from_count(c) / t) })
        .sum()
}
