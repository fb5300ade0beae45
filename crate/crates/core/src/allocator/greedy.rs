//! The three-phase greedy allocation and its on-demand baseline.

use crate::model::{LiveVideo, Quality, RegionId, SlotIndex, VideoId};
use crate::num::Scalar;
use crate::pricing::CloudModel;

use super::{
    rank_videos, Algorithm, AllocatorConfig, AllocatorError, CapacityLedger, DissGuard, InstanceKind, Phase,
    ServedDemand, SlotOutcome, VideoOutcome,
};

/// Ranks `videos` and allocates them with `algorithm`.
pub fn allocate_slot<S: Scalar>(
    algorithm: Algorithm,
    slot: SlotIndex,
    videos: &[LiveVideo],
    ledger: &mut CapacityLedger,
    cloud: &CloudModel<S>,
    cfg: &AllocatorConfig<S>,
) -> Result<SlotOutcome, AllocatorError> {
    run(algorithm, slot, &rank_videos(videos), ledger, cloud, cfg)
}

pub fn gnca_allocate_slot<S: Scalar>(
    slot: SlotIndex,
    ranked: &[&LiveVideo],
    ledger: &mut CapacityLedger,
    cloud: &CloudModel<S>,
    cfg: &AllocatorConfig<S>,
) -> Result<SlotOutcome, AllocatorError> {
    run(Algorithm::Gnca, slot, ranked, ledger, cloud, cfg)
}

pub fn gca_allocate_slot<S: Scalar>(
    slot: SlotIndex,
    ranked: &[&LiveVideo],
    ledger: &mut CapacityLedger,
    cloud: &CloudModel<S>,
    cfg: &AllocatorConfig<S>,
) -> Result<SlotOutcome, AllocatorError> {
    run(Algorithm::Gca, slot, ranked, ledger, cloud, cfg)
}

pub fn gmc_allocate_slot<S: Scalar>(
    slot: SlotIndex,
    ranked: &[&LiveVideo],
    ledger: &mut CapacityLedger,
    cloud: &CloudModel<S>,
    cfg: &AllocatorConfig<S>,
) -> Result<SlotOutcome, AllocatorError> {
    run(Algorithm::Gmc, slot, ranked, ledger, cloud, cfg)
}

struct Ctx<'a, S> {
    algorithm: Algorithm,
    cloud: &'a CloudModel<S>,
    cfg: &'a AllocatorConfig<S>,
    /// Per viewer region, serving regions by ascending delay.
    nearest: Vec<Vec<RegionId>>,
    cheapest: Vec<RegionId>,
}

impl<S: Scalar> Ctx<'_, S> {
    fn within(&self, s: RegionId, w: RegionId) -> bool {
        self.cloud.rtt.get(s, w) <= self.cfg.delay_threshold
    }

    fn reserved_order(&self, w: RegionId) -> &[RegionId] {
        match self.algorithm {
            Algorithm::Gnca => &self.nearest[w.0],
            _ => &self.cheapest,
        }
    }
}

/// Per-video running state.
struct VideoState {
    out: VideoOutcome,
    /// DVN and CVN as of the last dissatisfying reserved allocation.
    recorded: (u64, u64),
}

impl VideoState {
    fn has(&self, q: Quality, s: RegionId) -> bool {
        self.out.kinds.contains_key(&(q, s))
    }

    /// Uses an existing placement backed by one of `kinds` or opens one from
    /// `kinds`, in order. A placement of another kind blocks the region.
    fn try_region(&mut self, q: Quality, s: RegionId, kinds: &[InstanceKind], ledger: &mut CapacityLedger) -> bool {
        if let Some(k) = self.out.kinds.get(&(q, s)) {
            return kinds.contains(k);
        }
        for &k in kinds {
            if ledger.take(s, k) {
                self.out.plan.place(q, s);
                self.out.kinds.insert((q, s), k);
                return true;
            }
        }
        false
    }

    fn guard_admits(&self, p: u64, bp: u32, guard: DissGuard) -> bool {
        let (dvn, cvn) = match guard {
            DissGuard::PostUpdate => (self.out.dvn + p, self.out.cvn),
            DissGuard::Stale => self.recorded,
        };
        // dvn / cvn * 100 <= bp / 100, in integers
        dvn as u128 * 10_000 <= bp as u128 * cvn as u128
    }
}

fn run<S: Scalar>(
    algorithm: Algorithm,
    slot: SlotIndex,
    ranked: &[&LiveVideo],
    ledger: &mut CapacityLedger,
    cloud: &CloudModel<S>,
    cfg: &AllocatorConfig<S>,
) -> Result<SlotOutcome, AllocatorError> {
    let n = cloud.n_regions();
    if ledger.n_regions() != n {
        return Err(AllocatorError::RegionMismatch {
            ledger: ledger.n_regions(),
            cloud: n,
        });
    }
    let nearest = (0..n)
        .map(|w| {
            let mut rs: Vec<RegionId> = cloud.rtt.regions().collect();
            rs.sort_by(|&a, &b| {
                cloud.rtt
                    .get(a, RegionId(w))
                    .partial_cmp(&cloud.rtt.get(b, RegionId(w)))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            rs
        })
        .collect();
    let ctx = Ctx {
        algorithm,
        cloud,
        cfg,
        nearest,
        cheapest: cloud.prices.regions_by_zeta(),
    };

    let mut outcome = SlotOutcome {
        slot,
        algorithm,
        order: ranked.iter().map(|v| v.id()).collect(),
        videos: Default::default(),
        demands: Vec::new(),
    };
    for video in ranked {
        let mut state = VideoState {
            out: VideoOutcome::default(),
            recorded: (0, 0),
        };
        // regions ascending, qualities descending
        let mut pairs: Vec<(RegionId, Quality, u64)> = video.demand.iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        for (w, q, p) in pairs {
            let served = serve(&ctx, video.id(), w, q, p, &mut state, ledger);
            outcome.demands.push(served);
        }
        outcome.videos.insert(video.id(), state.out);
    }
    Ok(outcome)
}

fn serve<S: Scalar>(
    ctx: &Ctx<'_, S>,
    video: VideoId,
    w: RegionId,
    q: Quality,
    p: u64,
    state: &mut VideoState,
    ledger: &mut CapacityLedger,
) -> ServedDemand {
    use InstanceKind::{OnDemand, Reserved};
    state.out.cvn += p;
    let mut found: Option<(RegionId, Phase)> = None;

    if ctx.algorithm.uses_reservations() {
        found = ctx
            .reserved_order(w)
            .iter()
            .copied()
            .filter(|&s| ctx.within(s, w))
            .find(|&s| state.try_region(q, s, &[Reserved], ledger))
            .map(|s| (s, Phase::ReservedWithinDelay));

        if found.is_none() && state.guard_admits(p, ctx.cfg.diss_threshold_bp, ctx.cfg.guard) {
            found = ctx
                .reserved_order(w)
                .iter()
                .copied()
                .find(|&s| state.try_region(q, s, &[Reserved], ledger))
                .map(|s| (s, Phase::ReservedDissatisfied));
            if found.is_some() {
                state.out.dvn += p;
                state.recorded = (state.out.dvn, state.out.cvn);
            }
        }
    }

    if found.is_none() {
        found = ctx
            .cheapest
            .iter()
            .copied()
            .filter(|&s| ctx.within(s, w))
            .find(|&s| state.has(q, s) || state.try_region(q, s, &[OnDemand], ledger))
            .map(|s| (s, Phase::OnDemandWithinDelay));
    }

    if found.is_none() {
        let kinds: &[InstanceKind] = if ctx.algorithm.uses_reservations() {
            &[Reserved, OnDemand]
        } else {
            &[OnDemand]
        };
        found = ctx
            .cheapest
            .iter()
            .copied()
            .find(|&s| state.has(q, s) || state.try_region(q, s, kinds, ledger))
            .map(|s| (s, Phase::Fallback));
        if found.is_some() {
            state.out.dvn += p;
        }
    }

    match found {
        Some((s, phase)) => {
            state.out.plan.assign(q, w, s);
            ServedDemand {
                video,
                quality: q,
                viewer_region: w,
                viewers: p,
                serving_region: Some(s),
                satisfied: matches!(phase, Phase::ReservedWithinDelay | Phase::OnDemandWithinDelay),
                phase: Some(phase),
                kind: state.out.kinds.get(&(q, s)).copied(),
            }
        }
        None => {
            log::debug!("video {video}: no capacity left for {q} viewers in region {w}");
            ServedDemand {
                video,
                quality: q,
                viewer_region: w,
                viewers: p,
                serving_region: None,
                satisfied: false,
                phase: None,
                kind: None,
            }
        }
    }
}
