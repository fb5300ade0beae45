//! Shared generators for integration tests.

#![allow(dead_code)]

use crowdcast::model::{DemandMatrix, LiveVideo, Quality, QualityLadder, RegionId, RttMatrix, SlotIndex, VideoId, VideoMeta};
use crowdcast::pricing::{CloudModel, PriceBook};
use proptest::prelude::*;

/// One allocation slot: cloud tables, videos, reserved stock and settings.
#[derive(Clone, Debug)]
pub struct Instance {
    pub cloud: CloudModel<f64>,
    pub videos: Vec<LiveVideo>,
    pub reserved: Vec<u64>,
    pub limit: u64,
    pub delay: f64,
    pub diss_pct: u32,
}

pub fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=4)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(5.0f64..12.0, n),
                prop::collection::vec(0.0f64..200.0, n * n),
                prop::collection::vec((0.01f64..0.2, 0.0f64..0.15, 0.01f64..0.2), n),
                prop::collection::vec(
                    (0..n, 0usize..4, prop::collection::vec((0..n, 0usize..4, 1u64..40), 0..=6)),
                    0..=6,
                ),
                prop::collection::vec(0u64..4, n),
                0u64..5,
                prop_oneof![Just(8.8), 5.0f64..250.0, Just(1e6)],
                prop_oneof![Just(0u32), Just(10), Just(50), 0u32..=100],
            )
        })
        .prop_map(|(n, diag, extra, prices, vids, reserved, limit, delay, diss_pct)| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { diag[i] } else { diag[i].max(diag[j]) + extra[i * n + j] })
                        .collect()
                })
                .collect();
            let cloud = CloudModel::new(
                RttMatrix::new(rows).unwrap(),
                PriceBook::with_reserved_discount(
                    prices.iter().map(|p| p.0).collect(),
                    prices.iter().map(|p| p.1).collect(),
                    prices.iter().map(|p| p.2).collect(),
                    0.25,
                )
                .unwrap(),
                QualityLadder::default(),
            )
            .unwrap();
            let videos = vids
                .into_iter()
                .enumerate()
                .map(|(i, (rb, qb, entries))| {
                    let qb = Quality::from_index(qb).unwrap();
                    let meta = VideoMeta {
                        id: VideoId(100 + i as u64),
                        slot: SlotIndex(0),
                        broadcast_region: RegionId(rb),
                        original_quality: qb,
                    };
                    let demand = DemandMatrix::from_entries(
                        entries
                            .into_iter()
                            .map(|(r, q, v)| (RegionId(r), Quality::from_index(q.min(qb.index())).unwrap(), v)),
                    );
                    LiveVideo::new(meta, demand, n).unwrap()
                })
                .collect();
            Instance {
                cloud,
                videos,
                reserved,
                limit,
                delay,
                diss_pct,
            }
        })
}

