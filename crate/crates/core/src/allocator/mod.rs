//! Online allocation of live videos onto reserved and on-demand instances.
//!
//! Three greedy policies share one driver: [`Algorithm::Gnca`] looks for
//! the nearest reserved capacity first, [`Algorithm::Gca`] for the cheapest,
//! and [`Algorithm::Gmc`] rents on-demand instances only.

mod greedy;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{AllocationPlan, LiveVideo, Quality, RegionId, SlotIndex, VideoId};
use crate::num::Scalar;

pub use greedy::{allocate_slot, gca_allocate_slot, gmc_allocate_slot, gnca_allocate_slot};
pub use metrics::{compute_slot_metrics, SlotMetrics};

/// Default hourly on-demand cap per region.
pub const DEFAULT_ON_DEMAND_LIMIT: u64 = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocatorError {
    #[error("dissatisfaction threshold {0} is outside [0, 100]")]
    BadDissThreshold(f64),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("ledger covers {ledger} regions but the cloud has {cloud}")]
    RegionMismatch { ledger: usize, cloud: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Gnca,
    Gca,
    Gmc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gnca, Algorithm::Gca, Algorithm::Gmc];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Gnca => "GNCA",
            Algorithm::Gca => "GCA",
            Algorithm::Gmc => "GMC",
        }
    }

    /// Whether the policy draws on reserved capacity at all.
    pub fn uses_reservations(self) -> bool {
        self != Algorithm::Gmc
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = AllocatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GNCA" => Ok(Algorithm::Gnca),
            "GCA" => Ok(Algorithm::Gca),
            "GMC" => Ok(Algorithm::Gmc),
            _ => Err(AllocatorError::UnknownAlgorithm(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstanceKind {
    Reserved,
    OnDemand,
}

impl InstanceKind {
    pub fn label(self) -> &'static str {
        match self {
            InstanceKind::Reserved => "reserved",
            InstanceKind::OnDemand => "ondemand",
        }
    }
}

impl FromStr for InstanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "reserved" => Ok(InstanceKind::Reserved),
            "ondemand" => Ok(InstanceKind::OnDemand),
            other => Err(format!("unknown instance kind {other:?}")),
        }
    }
}

/// Reserved and on-demand stock per region for one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityLedger {
    reserved_initial: Vec<u64>,
    reserved_remaining: Vec<u64>,
    on_demand_limit: u64,
    on_demand_remaining: Vec<u64>,
}

impl CapacityLedger {
    pub fn new(reserved: Vec<u64>, on_demand_limit: u64) -> Self {
        let n = reserved.len();
        Self {
            reserved_remaining: reserved.clone(),
            reserved_initial: reserved,
            on_demand_limit,
            on_demand_remaining: vec![on_demand_limit; n],
        }
    }

    pub fn n_regions(&self) -> usize {
        self.reserved_initial.len()
    }

    pub fn on_demand_limit(&self) -> u64 {
        self.on_demand_limit
    }

    pub fn reserved_initial(&self) -> &[u64] {
        &self.reserved_initial
    }

    pub fn reserved_remaining(&self, r: RegionId) -> u64 {
        self.reserved_remaining[r.0]
    }

    pub fn reserved_used(&self, r: RegionId) -> u64 {
        self.reserved_initial[r.0] - self.reserved_remaining[r.0]
    }

    pub fn on_demand_remaining(&self, r: RegionId) -> u64 {
        self.on_demand_remaining[r.0]
    }

    pub fn on_demand_used(&self, r: RegionId) -> u64 {
        self.on_demand_limit - self.on_demand_remaining[r.0]
    }

    pub fn on_demand_used_all(&self) -> Vec<u64> {
        (0..self.n_regions()).map(|r| self.on_demand_used(RegionId(r))).collect()
    }

    pub fn take(&mut self, r: RegionId, kind: InstanceKind) -> bool {
        let slot = match kind {
            InstanceKind::Reserved => &mut self.reserved_remaining[r.0],
            InstanceKind::OnDemand => &mut self.on_demand_remaining[r.0],
        };
        if *slot == 0 {
            return false;
        }
        *slot -= 1;
        true
    }

    pub fn has(&self, r: RegionId, kind: InstanceKind) -> bool {
        match kind {
            InstanceKind::Reserved => self.reserved_remaining[r.0] > 0,
            InstanceKind::OnDemand => self.on_demand_remaining[r.0] > 0,
        }
    }
}

/// How the dissatisfaction guard of the second phase reads the running
/// percentage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DissGuard {
    /// Admit only if the percentage after adding this demand stays within
    /// the threshold.
    #[default]
    PostUpdate,
    /// Compare the value recorded after the previous dissatisfying
    /// allocation, as the original pseudocode does. May overshoot.
    Stale,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocatorConfig<S> {
    pub delay_threshold: S,
    /// Tolerated dissatisfied share in basis points (1/100 of a percent).
    pub diss_threshold_bp: u32,
    pub guard: DissGuard,
}

impl<S: Scalar> AllocatorConfig<S> {
    pub fn new(delay_threshold: S, diss_threshold_pct: f64) -> Result<Self, AllocatorError> {
        if !(0.0..=100.0).contains(&diss_threshold_pct) {
            return Err(AllocatorError::BadDissThreshold(diss_threshold_pct));
        }
        Ok(Self {
            delay_threshold,
            diss_threshold_bp: (diss_threshold_pct * 100.0).round() as u32,
            guard: DissGuard::PostUpdate,
        })
    }

    pub fn diss_threshold_pct(&self) -> f64 {
        self.diss_threshold_bp as f64 / 100.0
    }
}

/// Which rule placed a demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// Existing placement or reserved instance within the threshold.
    ReservedWithinDelay,
    /// Reserved instance beyond the threshold, tolerated as dissatisfaction.
    ReservedDissatisfied,
    /// On-demand instance within the threshold.
    OnDemandWithinDelay,
    /// Any capacity beyond the threshold once the above failed.
    Fallback,
}

/// One `(video, viewer region, quality)` demand and how it was served.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServedDemand {
    pub video: VideoId,
    pub quality: Quality,
    pub viewer_region: RegionId,
    pub viewers: u64,
    /// `None` when no capacity was left anywhere.
    pub serving_region: Option<RegionId>,
    pub satisfied: bool,
    pub phase: Option<Phase>,
    /// Kind of the instance hosting the serving placement.
    pub kind: Option<InstanceKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VideoOutcome {
    pub plan: AllocationPlan,
    pub kinds: BTreeMap<(Quality, RegionId), InstanceKind>,
    /// Viewers considered so far.
    pub cvn: u64,
    /// Viewers served beyond the delay threshold.
    pub dvn: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotOutcome {
    pub slot: SlotIndex,
    pub algorithm: Algorithm,
    /// In rank order.
    pub order: Vec<VideoId>,
    pub videos: BTreeMap<VideoId, VideoOutcome>,
    /// Every demand in processing order, served or not.
    pub demands: Vec<ServedDemand>,
}

impl SlotOutcome {
    pub fn unserved(&self) -> impl Iterator<Item = &ServedDemand> {
        self.demands.iter().filter(|d| d.serving_region.is_none())
    }

    pub fn placements(&self) -> impl Iterator<Item = (VideoId, Quality, RegionId, InstanceKind)> + '_ {
        self.order.iter().flat_map(move |id| {
            self.videos[id]
                .kinds
                .iter()
                .map(move |(&(q, r), &k)| (*id, q, r, k))
        })
    }
}

/// Videos by descending total viewers, ties by ascending id.
pub fn rank_videos(videos: &[LiveVideo]) -> Vec<&LiveVideo> {
    let mut out: Vec<&LiveVideo> = videos.iter().collect();
    out.sort_by(|a, b| b.total_viewers().cmp(&a.total_viewers()).then(a.id().cmp(&b.id())));
    out
}
