//! Built-in ten-region deployment: site catalog, round-trip delays and
//! per-region prices.

use crate::model::{QualityLadder, RttMatrix, LOCAL_FLOOR_MS};
use crate::num::Scalar;
use crate::pricing::{CloudModel, PriceBook, DEFAULT_RESERVED_DISCOUNT};
use crate::workload::{RegionCatalog, RegionInfo};

/// `(name, lat, lon)` of the default sites, in region-index order.
pub const SITES: [(&str, f64, f64); 10] = [
    ("California", 37.35, -121.96),
    ("Virginia", 38.13, -78.45),
    ("Ohio", 40.42, -82.91),
    ("Sao Paulo", -23.55, -46.63),
    ("Paris", 48.86, 2.35),
    ("Frankfurt", 50.11, 8.68),
    ("Ningxia", 38.47, 106.27),
    ("Singapore", 1.35, 103.82),
    ("Seoul", 37.57, 126.98),
    ("Mumbai", 19.08, 72.88),
];

/// Upper triangle of the symmetric default delay table, ms.
const RTT_UPPER: [[f64; 10]; 10] = [
    [0.0, 62.0, 52.0, 175.0, 140.0, 148.0, 190.0, 170.0, 135.0, 230.0],
    [0.0, 0.0, 12.0, 120.0, 80.0, 88.0, 230.0, 215.0, 180.0, 190.0],
    [0.0, 0.0, 0.0, 128.0, 90.0, 98.0, 220.0, 205.0, 170.0, 200.0],
    [0.0, 0.0, 0.0, 0.0, 195.0, 205.0, 330.0, 325.0, 300.0, 300.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 12.0, 210.0, 160.0, 250.0, 110.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 200.0, 155.0, 245.0, 115.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 90.0, 60.0, 130.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 70.0, 58.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 125.0],
    [0.0; 10],
];

/// On-demand hourly instance price, $.
pub const ZETA: [f64; 10] = [0.106, 0.085, 0.085, 0.131, 0.101, 0.097, 0.10, 0.098, 0.096, 0.089];
/// Transfer price out of the broadcaster's region, $/GB.
pub const ETA: [f64; 10] = [0.02, 0.02, 0.02, 0.138, 0.02, 0.02, 0.08, 0.09, 0.08, 0.086];
/// Delivery price to viewers, $/GB.
pub const OMEGA: [f64; 10] = [0.09, 0.09, 0.09, 0.15, 0.09, 0.09, 0.13, 0.12, 0.126, 0.1093];

pub fn catalog() -> RegionCatalog {
    RegionCatalog::new(
        SITES
            .iter()
            .map(|&(name, lat, lon)| RegionInfo {
                name: name.to_string(),
                lat,
                lon,
            })
            .collect(),
    )
    .expect("default catalog is valid")
}

pub fn rtt<S: Scalar>() -> RttMatrix<S> {
    let rows = (0..10)
        .map(|i| {
            (0..10)
                .map(|j| {
                    let v = match i.cmp(&j) {
                        std::cmp::Ordering::Equal => LOCAL_FLOOR_MS,
                        std::cmp::Ordering::Less => RTT_UPPER[i][j],
                        std::cmp::Ordering::Greater => RTT_UPPER[j][i],
                    };
                    S::lit(v)
                })
                .collect()
        })
        .collect();
    RttMatrix::new(rows).expect("default delay table is valid")
}

pub fn price_book<S: Scalar>(reserved_discount: f64) -> PriceBook<S> {
    let conv = |v: &[f64]| v.iter().map(|&x| S::lit(x)).collect::<Vec<S>>();
    PriceBook::with_reserved_discount(conv(&ZETA), conv(&ETA), conv(&OMEGA), S::lit(reserved_discount))
        .expect("default prices are valid")
}

pub fn cloud<S: Scalar>() -> CloudModel<S> {
    CloudModel::new(rtt(), price_book(DEFAULT_RESERVED_DISCOUNT), QualityLadder::default())
        .expect("default tables agree on region count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegionId;

    #[test]
    fn defaults_are_consistent() {
        let c = cloud::<f64>();
        assert_eq!(c.n_regions(), 10);
        assert_eq!(catalog().len(), 10);
        for i in 0..10 {
            assert_eq!(c.rtt.local(RegionId(i)), 8.8);
            for j in 0..10 {
                assert_eq!(c.rtt.get(RegionId(i), RegionId(j)), c.rtt.get(RegionId(j), RegionId(i)));
            }
        }
        // Ohio and Sao Paulo on-demand prices, Ohio serving price
        assert_eq!(c.prices.zeta(RegionId(2)), 0.085);
        assert_eq!(c.prices.zeta(RegionId(3)), 0.131);
        assert_eq!(c.prices.omega(RegionId(2)), 0.09);
        assert_eq!(c.prices.mu(RegionId(2)), 0.25 * 0.085);
    }
}
