//! Per-slot cost, latency and capacity-use metrics.

use std::collections::{BTreeMap, HashMap};

use crate::model::{weighted_mean, LiveVideo, SlotIndex, VideoId};
use crate::num::{bits_key, Scalar};
use crate::pricing::{phase2_cost, CloudModel};

use super::{Algorithm, CapacityLedger, InstanceKind, SlotOutcome};

/// Evaluation row for one slot and one algorithm. Percentages are over
/// served viewers.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotMetrics<S> {
    pub slot: SlotIndex,
    pub algorithm: Algorithm,
    pub total_cost: S,
    pub avg_latency_ms: S,
    pub hit_pct: S,
    pub on_demand_pct: S,
    pub diss_pct: S,
    /// Viewers left without any serving site.
    pub unserved: u64,
}

fn pct<S: Scalar>(part: u64, whole: u64) -> S {
    if whole == 0 {
        S::zero()
    } else {
        S::lit(100.0) * S::from_count(part) / S::from_count(whole)
    }
}

/// Metrics of a finished slot. `ledger` must be the one the outcome was
/// produced with; every reserved instance it started with is charged.
pub fn compute_slot_metrics<S: Scalar>(
    outcome: &SlotOutcome,
    videos: &[LiveVideo],
    ledger: &CapacityLedger,
    cloud: &CloudModel<S>,
) -> SlotMetrics<S> {
    let by_id: BTreeMap<VideoId, &LiveVideo> = videos.iter().map(|v| (v.id(), v)).collect();
    let pairs: Vec<_> = outcome
        .order
        .iter()
        .filter_map(|id| Some((*by_id.get(id)?, &outcome.videos.get(id)?.plan)))
        .collect();
    let total_cost = phase2_cost(
        ledger.reserved_initial(),
        &ledger.on_demand_used_all(),
        pairs.iter().copied(),
        &cloud.ladder,
        &cloud.prices,
    );

    let (mut served, mut hits, mut on_demand, mut diss, mut unserved) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let mut groups: HashMap<(u64, i16, i8), (S, u64)> = HashMap::new();
    for d in &outcome.demands {
        let Some(s) = d.serving_region else {
            unserved += d.viewers;
            continue;
        };
        served += d.viewers;
        if s == d.viewer_region {
            hits += d.viewers;
        }
        if d.kind == Some(InstanceKind::OnDemand) {
            on_demand += d.viewers;
        }
        if !d.satisfied {
            diss += d.viewers;
        }
        let delay = cloud.rtt.get(s, d.viewer_region);
        groups.entry(bits_key(delay)).or_insert((delay, 0)).1 += d.viewers;
    }
    let avg_latency_ms = if served == 0 {
        S::zero()
    } else {
        weighted_mean(groups.into_values(), served)
    };
    SlotMetrics {
        slot: outcome.slot,
        algorithm: outcome.algorithm,
        total_cost,
        avg_latency_ms,
        hit_pct: pct(hits, served),
        on_demand_pct: pct(on_demand, served),
        diss_pct: pct(diss, served),
        unserved,
    }
}
