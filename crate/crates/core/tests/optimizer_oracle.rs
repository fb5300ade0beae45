//! The exact optimizer against exhaustive enumeration on small instances.

use crowdcast::model::{
    avg_latency, validate_plan, DemandMatrix, LiveVideo, Quality, QualityLadder, RegionId, RttMatrix, SlotIndex,
    VideoId, VideoMeta,
};
use crowdcast::optimizer::{brute_force_video, solve_video, OptimizerConfig, OptimizerError};
use crowdcast::pricing::{video_cost, CloudModel, PriceBook};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Instance {
    cloud: CloudModel<f64>,
    video: LiveVideo,
    threshold: f64,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=3)
        .prop_flat_map(|n| {
            let max_q = if n <= 2 { 3 } else { 2 };
            (
                Just(n),
                prop::collection::vec(5.0f64..12.0, n),
                prop::collection::vec(0.0f64..200.0, n * n),
                prop::collection::vec((0.01f64..0.2, 0.0f64..0.15, 0.01f64..0.2), n),
                0..n,
                0usize..max_q,
                prop::collection::vec((0..n, 0usize..4, 1u64..30), 0..=6),
                prop_oneof![Just(8.8), 5.0f64..250.0, Just(1e6)],
            )
        })
        .prop_map(|(n, diag, extra, prices, rb, qb, entries, threshold)| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { diag[i] } else { diag[i].max(diag[j]) + extra[i * n + j] })
                        .collect()
                })
                .collect();
            let zeta: Vec<f64> = prices.iter().map(|p| p.0).collect();
            let eta: Vec<f64> = prices.iter().map(|p| p.1).collect();
            let omega: Vec<f64> = prices.iter().map(|p| p.2).collect();
            let cloud = CloudModel::new(
                RttMatrix::new(rows).unwrap(),
                PriceBook::with_reserved_discount(zeta, eta, omega, 0.25).unwrap(),
                QualityLadder::default(),
            )
            .unwrap();
            let qb = Quality::from_index(qb).unwrap();
            let meta = VideoMeta {
                id: VideoId(1),
                slot: SlotIndex(0),
                broadcast_region: RegionId(rb),
                original_quality: qb,
            };
            let demand = DemandMatrix::from_entries(
                entries
                    .into_iter()
                    .map(|(r, q, v)| (RegionId(r), Quality::from_index(q.min(qb.index())).unwrap(), v)),
            );
            let video = LiveVideo::new(meta, demand, n).unwrap();
            Instance { cloud, video, threshold }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exact_matches_enumeration(inst in instance()) {
        let cfg = OptimizerConfig::with_threshold(inst.threshold);
        let exact = solve_video(&inst.video, &inst.cloud, &cfg);
        let brute = brute_force_video(&inst.video, &inst.cloud, &cfg);
        match (exact, brute) {
            (Ok(e), Ok(b)) => {
                let ce = video_cost(&inst.video, &e, &inst.cloud.ladder, &inst.cloud.prices).total();
                let cb = video_cost(&inst.video, &b, &inst.cloud.ladder, &inst.cloud.prices).total();
                prop_assert!((ce - cb).abs() <= 1e-9 * cb.abs().max(1.0), "exact {} vs brute {}", ce, cb);
                prop_assert!(validate_plan(&e, &inst.video.meta, &inst.video.demand).is_empty());
                let lat = avg_latency(&e, &inst.video.demand, &inst.cloud.rtt).unwrap();
                prop_assert!(lat <= inst.threshold + 1e-9);
                prop_assert_eq!(e.placements, b.placements);
            }
            (Err(OptimizerError::Infeasible { .. }), Err(OptimizerError::Infeasible { .. })) => {}
            (e, b) => prop_assert!(false, "exact {:?} vs brute {:?}", e, b),
        }
    }
}
