//! Exhaustive reference solver for small instances.

use crate::model::{avg_latency, AllocationPlan, LiveVideo, Quality, RegionId};
use crate::num::Scalar;
use crate::pricing::video_cost;
use crate::pricing::CloudModel;

use super::{OptimizerConfig, OptimizerError, TieKey};

/// Hard cap on (placement subset, assignment) pairs visited.
pub const BRUTE_FORCE_LIMIT: u128 = 20_000_000;

/// Enumerates every subset of legal placements and every assignment of
/// demands to placed sites, keeping the cheapest plan that meets the delay
/// threshold. Same tie-break as [`super::solve_video`].
pub fn brute_force_video<S: Scalar>(
    video: &LiveVideo,
    cloud: &CloudModel<S>,
    cfg: &OptimizerConfig<S>,
) -> Result<AllocationPlan, OptimizerError> {
    let meta = &video.meta;
    video.demand.check_against(meta, cloud.n_regions())?;
    let forced = (meta.original_quality, meta.broadcast_region);

    let optional: Vec<(Quality, RegionId)> = Quality::ALL
        .iter()
        .filter(|&&q| q <= meta.original_quality)
        .flat_map(|&q| cloud.rtt.regions().map(move |r| (q, r)))
        .filter(|&p| p != forced)
        .collect();
    if optional.len() >= 64 {
        return Err(OptimizerError::ExplosionGuard {
            video: meta.id,
            combinations: u128::MAX,
        });
    }
    let demands: Vec<(RegionId, Quality)> = video.demand.iter().map(|(r, q, _)| (r, q)).collect();

    // Size the enumeration before doing it.
    let mut combinations: u128 = 0;
    for subset in 0u64..(1u64 << optional.len()) {
        let per_quality = |q: Quality| {
            (q == forced.0) as u128
                + optional
                    .iter()
                    .enumerate()
                    .filter(|&(i, p)| subset >> i & 1 == 1 && p.0 == q)
                    .count() as u128
        };
        let mut prod: u128 = 1;
        for &(_, q) in &demands {
            prod = prod.saturating_mul(per_quality(q));
        }
        combinations = combinations.saturating_add(prod);
        if combinations > BRUTE_FORCE_LIMIT {
            return Err(OptimizerError::ExplosionGuard {
                video: meta.id,
                combinations,
            });
        }
    }

    let mut best: Option<(S, TieKey, AllocationPlan)> = None;
    let mut min_latency = S::infinity();
    for subset in 0u64..(1u64 << optional.len()) {
        let mut base = AllocationPlan::new();
        base.place(forced.0, forced.1);
        for (i, &(q, r)) in optional.iter().enumerate() {
            if subset >> i & 1 == 1 {
                base.place(q, r);
            }
        }
        let options: Vec<Vec<RegionId>> = demands
            .iter()
            .map(|&(_, q)| base.placements.iter().filter(|p| p.0 == q).map(|p| p.1).collect())
            .collect();
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        let mut digits = vec![0usize; demands.len()];
        loop {
            let mut plan = base.clone();
            for (k, &(w, q)) in demands.iter().enumerate() {
                plan.assign(q, w, options[k][digits[k]]);
            }
            let lat = avg_latency(&plan, &video.demand, &cloud.rtt)?;
            min_latency = min_latency.min(lat);
            if lat <= cfg.delay_threshold + cfg.tolerance {
                let cost = video_cost(video, &plan, &cloud.ladder, &cloud.prices).total();
                let key = TieKey::of_plan(&plan);
                let better = match &best {
                    None => true,
                    Some((bc, bk, _)) => cost < *bc - cfg.tolerance || (cost <= *bc + cfg.tolerance && key < *bk),
                };
                if better {
                    best = Some((cost, key, plan));
                }
            }
            // advance the mixed-radix counter
            let mut k = 0;
            while k < digits.len() {
                digits[k] += 1;
                if digits[k] < options[k].len() {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
        }
    }

    best.map(|(_, _, p)| p).ok_or(OptimizerError::Infeasible {
        video: meta.id,
        threshold_ms: cfg.delay_threshold.as_f64(),
        min_latency_ms: min_latency.as_f64(),
    })
}
