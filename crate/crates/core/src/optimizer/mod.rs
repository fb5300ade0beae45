//! Offline cost-minimizing placement.
//!
//! The slot problem separates by video: neither the objective nor any
//! constraint couples two videos. Each video is solved exactly by
//! [`solve_video`]; [`brute_force_video`] enumerates the same space naively
//! and serves as its correctness oracle on small instances.

mod brute;
mod exact;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::forecast::InstanceSeries;
use crate::model::{avg_latency, AllocationPlan, LiveVideo, ModelError, Quality, RegionId, SlotIndex, VideoId};
use crate::num::Scalar;
use crate::pricing::{video_cost, CloudModel};

pub use brute::brute_force_video;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("video {video}: no plan meets the {threshold_ms} ms delay threshold (best achievable {min_latency_ms} ms)")]
    Infeasible {
        video: VideoId,
        threshold_ms: f64,
        min_latency_ms: f64,
    },
    #[error("video {video}: search budget of {limit} nodes exhausted")]
    NodeLimitExceeded {
        video: VideoId,
        limit: u64,
        /// Best feasible plan known when the budget ran out.
        best: Option<Box<AllocationPlan>>,
    },
    #[error("video {video}: enumeration of {combinations} combinations exceeds the brute-force guard")]
    ExplosionGuard { video: VideoId, combinations: u128 },
    #[error("slot {slot}: videos from different slots in one batch (video {video})")]
    MixedSlots { slot: SlotIndex, video: VideoId },
    #[error("solutions do not cover a contiguous slot range: expected slot {expected}, found {found}")]
    GapInHorizon { expected: SlotIndex, found: SlotIndex },
    #[error("solutions for {0} regions expected")]
    RegionMismatch(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig<S> {
    /// Upper bound on each video's viewer-weighted mean delay, ms.
    pub delay_threshold: S,
    /// Search budget per video.
    pub node_limit: u64,
    /// Absolute epsilon for cost and delay comparisons.
    pub tolerance: S,
}

impl<S: Scalar> OptimizerConfig<S> {
    pub fn with_threshold(delay_threshold: S) -> Self {
        Self {
            delay_threshold,
            ..Self::default()
        }
    }
}

impl<S: Scalar> Default for OptimizerConfig<S> {
    fn default() -> Self {
        Self {
            delay_threshold: S::lit(120.0),
            node_limit: 20_000_000,
            tolerance: S::lit(1e-9),
        }
    }
}

/// Deterministic tie-break order among equal-cost plans: fewer placements,
/// then smaller region indices. All three fields add up over disjoint
/// placement sets, which keeps the order consistent when partial plans are
/// combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TieKey {
    pub count: u32,
    pub index_sum: u32,
    pub lex: u128,
}

impl TieKey {
    pub fn of_placement(q: Quality, r: RegionId) -> Self {
        Self {
            count: 1,
            index_sum: r.0 as u32,
            lex: 1u128 << (r.0 * 4 + q.index()),
        }
    }

    pub fn of_plan(plan: &AllocationPlan) -> Self {
        plan.placements
            .iter()
            .fold(Self::default(), |acc, &(q, r)| acc + Self::of_placement(q, r))
    }
}

impl std::ops::Add for TieKey {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            count: self.count + o.count,
            index_sum: self.index_sum + o.index_sum,
            lex: self.lex + o.lex,
        }
    }
}

/// Minimum-cost plan for one video subject to the structural constraints and
/// the average-delay threshold.
pub fn solve_video<S: Scalar>(
    video: &LiveVideo,
    cloud: &CloudModel<S>,
    cfg: &OptimizerConfig<S>,
) -> Result<AllocationPlan, OptimizerError> {
    video.demand.check_against(&video.meta, cloud.n_regions())?;
    exact::solve(video, cloud, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotSolution<S> {
    pub slot: SlotIndex,
    pub plans: BTreeMap<VideoId, AllocationPlan>,
    /// Placements per region summed over all plans.
    pub instance_counts: Vec<u64>,
    pub objective: S,
    pub per_video_cost: BTreeMap<VideoId, S>,
    pub per_video_latency: BTreeMap<VideoId, S>,
}

impl<S: Scalar> SlotSolution<S> {
    pub fn empty(slot: SlotIndex, n_regions: usize) -> Self {
        Self {
            slot,
            plans: BTreeMap::new(),
            instance_counts: vec![0; n_regions],
            objective: S::zero(),
            per_video_cost: BTreeMap::new(),
            per_video_latency: BTreeMap::new(),
        }
    }

    pub fn total_instances(&self) -> u64 {
        self.instance_counts.iter().sum()
    }
}

/// Solves every video of one slot. An infeasible video aborts the slot.
pub fn solve_slot<S: Scalar>(
    slot: SlotIndex,
    videos: &[LiveVideo],
    cloud: &CloudModel<S>,
    cfg: &OptimizerConfig<S>,
) -> Result<SlotSolution<S>, OptimizerError> {
    let n = cloud.n_regions();
    let mut sol = SlotSolution::empty(slot, n);
    let mut costs = Vec::with_capacity(videos.len());
    for v in videos {
        if v.meta.slot != slot {
            return Err(OptimizerError::MixedSlots { slot, video: v.id() });
        }
        let plan = solve_video(v, cloud, cfg)?;
        let cost = video_cost(v, &plan, &cloud.ladder, &cloud.prices).total();
        let lat = avg_latency(&plan, &v.demand, &cloud.rtt)?;
        for (r, k) in plan.instances_per_region(n).into_iter().enumerate() {
            sol.instance_counts[r] += k;
        }
        costs.push(cost);
        sol.per_video_cost.insert(v.id(), cost);
        sol.per_video_latency.insert(v.id(), lat);
        sol.plans.insert(v.id(), plan);
    }
    sol.objective = costs.into_iter().sum();
    Ok(sol)
}

/// Turns per-slot solutions into one instance-count series per region.
/// Input order does not matter; missing or repeated slots are an error.
pub fn aggregate_instance_counts<S: Scalar>(
    solutions: &[SlotSolution<S>],
    n_regions: usize,
) -> Result<Vec<InstanceSeries>, OptimizerError> {
    let mut sorted: Vec<&SlotSolution<S>> = solutions.iter().collect();
    sorted.sort_by_key(|s| s.slot);
    let start = sorted.first().map(|s| s.slot).unwrap_or_default();
    for (i, s) in sorted.iter().enumerate() {
        let expected = SlotIndex(start.0 + i as u32);
        if s.slot != expected {
            return Err(OptimizerError::GapInHorizon { expected, found: s.slot });
        }
        if s.instance_counts.len() != n_regions {
            return Err(OptimizerError::RegionMismatch(n_regions));
        }
    }
    Ok((0..n_regions)
        .map(|r| InstanceSeries::new(RegionId(r), start, sorted.iter().map(|s| s.instance_counts[r]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_plan, DemandMatrix, QualityLadder, RttMatrix, VideoMeta};
    use crate::pricing::PriceBook;

    pub(crate) fn two_region_cloud() -> CloudModel<f64> {
        let rtt = RttMatrix::new(vec![vec![8.8, 100.0], vec![100.0, 8.8]]).unwrap();
        let prices = PriceBook::with_reserved_discount(vec![0.10, 0.05], vec![0.02, 0.02], vec![0.09, 0.05], 0.25).unwrap();
        CloudModel::new(rtt, prices, QualityLadder::default()).unwrap()
    }

    fn video(id: u64, slot: u32, rb: usize, qb: Quality, entries: &[(usize, Quality, u64)]) -> LiveVideo {
        LiveVideo::new(
            VideoMeta {
                id: VideoId(id),
                slot: SlotIndex(slot),
                broadcast_region: RegionId(rb),
                original_quality: qb,
            },
            DemandMatrix::from_entries(entries.iter().map(|&(r, q, p)| (RegionId(r), q, p))),
            2,
        )
        .unwrap()
    }

    // Hand evaluation of both candidate plans of the two-region instance.
    fn remote_cost() -> f64 {
        0.10 + 0.02 * 0.738 + 0.09 * 0.738 * 10.0
    }

    fn open_b_cost() -> f64 {
        0.10 + 0.05 + 2.0 * 0.02 * 0.738 + 0.05 * 0.738 * 10.0
    }

    #[test]
    fn zero_viewer_video_hosts_original_only() {
        let cloud = two_region_cloud();
        let v = video(1, 0, 0, Quality::P720, &[]);
        let plan = solve_video(&v, &cloud, &OptimizerConfig::default()).unwrap();
        assert_eq!(plan.placements.len(), 1);
        assert!(plan.placements.contains(&(Quality::P720, RegionId(0))));
        let cost = video_cost(&v, &plan, &cloud.ladder, &cloud.prices).total();
        assert!((cost - (0.10 + 0.02 * 0.738)).abs() < 1e-12);
    }

    #[test]
    fn two_region_instance_opens_remote_site() {
        let cloud = two_region_cloud();
        let v = video(1, 0, 0, Quality::P720, &[(1, Quality::P720, 10)]);
        assert!((remote_cost() - 0.77896).abs() < 1e-12);
        assert!((open_b_cost() - 0.54852).abs() < 1e-12);

        let plan = solve_video(&v, &cloud, &OptimizerConfig::with_threshold(120.0)).unwrap();
        assert!(validate_plan(&plan, &v.meta, &v.demand).is_empty());
        assert_eq!(plan.serving(Quality::P720, RegionId(1)), Some(RegionId(1)));
        let cost = video_cost(&v, &plan, &cloud.ladder, &cloud.prices).total();
        assert!((cost - 0.54852).abs() < 1e-12);

        let brute = brute_force_video(&v, &cloud, &OptimizerConfig::with_threshold(120.0)).unwrap();
        assert_eq!(brute, plan);
    }

    #[test]
    fn tight_threshold_forces_local_serving() {
        let cloud = two_region_cloud();
        // open-in-B is the cheaper plan anyway, so also check an instance
        // where remote serving would win without the threshold
        let rtt = RttMatrix::new(vec![vec![8.8, 100.0], vec![100.0, 8.8]]).unwrap();
        let prices = PriceBook::with_reserved_discount(vec![0.10, 5.0], vec![0.02, 0.02], vec![0.09, 0.05], 0.25).unwrap();
        let pricey_b = CloudModel::new(rtt, prices, QualityLadder::default()).unwrap();
        let v = video(1, 0, 0, Quality::P720, &[(1, Quality::P720, 10)]);

        let loose = solve_video(&v, &pricey_b, &OptimizerConfig::with_threshold(120.0)).unwrap();
        assert_eq!(loose.serving(Quality::P720, RegionId(1)), Some(RegionId(0)));
        for c in [&cloud, &pricey_b] {
            let plan = solve_video(&v, c, &OptimizerConfig::with_threshold(8.8)).unwrap();
            assert_eq!(plan.serving(Quality::P720, RegionId(1)), Some(RegionId(1)));
            assert_eq!(avg_latency(&plan, &v.demand, &c.rtt).unwrap(), 8.8);
        }
    }

    #[test]
    fn threshold_below_floor_is_infeasible() {
        let cloud = two_region_cloud();
        let v = video(1, 0, 0, Quality::P720, &[(1, Quality::P720, 10)]);
        let err = solve_video(&v, &cloud, &OptimizerConfig::with_threshold(5.0)).unwrap_err();
        assert!(matches!(err, OptimizerError::Infeasible { .. }));
        assert!(matches!(
            brute_force_video(&v, &cloud, &OptimizerConfig::with_threshold(5.0)),
            Err(OptimizerError::Infeasible { .. })
        ));
    }

    #[test]
    fn single_region_has_unique_plan() {
        let rtt = RttMatrix::new(vec![vec![8.8]]).unwrap();
        let prices = PriceBook::with_reserved_discount(vec![0.1], vec![0.02], vec![0.09], 0.25).unwrap();
        let cloud = CloudModel::new(rtt, prices, QualityLadder::default()).unwrap();
        let v = LiveVideo::new(
            VideoMeta {
                id: VideoId(3),
                slot: SlotIndex(0),
                broadcast_region: RegionId(0),
                original_quality: Quality::P480,
            },
            DemandMatrix::from_entries([(RegionId(0), Quality::P240, 2), (RegionId(0), Quality::P480, 5)]),
            1,
        )
        .unwrap();
        let cfg = OptimizerConfig::with_threshold(8.8);
        let plan = solve_video(&v, &cloud, &cfg).unwrap();
        assert_eq!(plan, brute_force_video(&v, &cloud, &cfg).unwrap());
        assert_eq!(plan.placements.len(), 2);
    }

    #[test]
    fn slot_objective_is_sum_of_videos() {
        let cloud = two_region_cloud();
        let cfg = OptimizerConfig::with_threshold(120.0);
        let a = video(1, 4, 0, Quality::P720, &[(1, Quality::P720, 10)]);
        let b = video(2, 4, 1, Quality::P360, &[(0, Quality::P240, 3), (1, Quality::P360, 2)]);
        let both = solve_slot(SlotIndex(4), &[a.clone(), b.clone()], &cloud, &cfg).unwrap();
        let sa = solve_slot(SlotIndex(4), &[a], &cloud, &cfg).unwrap();
        let sb = solve_slot(SlotIndex(4), &[b], &cloud, &cfg).unwrap();
        assert!((both.objective - (sa.objective + sb.objective)).abs() < 1e-12);
        let recount: u64 = both.plans.values().map(|p| p.placements.len() as u64).sum();
        assert_eq!(both.total_instances(), recount);

        let empty = solve_slot::<f64>(SlotIndex(0), &[], &cloud, &cfg).unwrap();
        assert_eq!(empty.objective, 0.0);
        assert_eq!(empty.instance_counts, vec![0, 0]);

        let wrong = video(9, 5, 0, Quality::P240, &[]);
        assert!(matches!(
            solve_slot(SlotIndex(4), &[wrong], &cloud, &cfg),
            Err(OptimizerError::MixedSlots { .. })
        ));
    }

    #[test]
    fn aggregation_reorders_and_rejects_gaps() {
        let mk = |slot: u32, counts: Vec<u64>| SlotSolution::<f64> {
            instance_counts: counts,
            ..SlotSolution::empty(SlotIndex(slot), 2)
        };
        let sols = vec![mk(2, vec![5, 1]), mk(0, vec![2, 0]), mk(1, vec![0, 3])];
        let series = aggregate_instance_counts(&sols, 2).unwrap();
        assert_eq!(series[0].counts(), &[2, 0, 5]);
        assert_eq!(series[1].counts(), &[0, 3, 1]);
        for t in 0..3 {
            let by_region: u64 = series.iter().map(|s| s.counts()[t]).sum();
            let total = sols.iter().find(|s| s.slot == SlotIndex(t as u32)).unwrap().total_instances();
            assert_eq!(by_region, total);
        }
        let gap = vec![mk(0, vec![1, 1]), mk(2, vec![1, 1])];
        assert!(matches!(
            aggregate_instance_counts(&gap, 2),
            Err(OptimizerError::GapInHorizon { .. })
        ));
    }
}
