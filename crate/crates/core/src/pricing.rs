//! Regional prices and the cost of a set of placement plans.
//!
//! Operational cost is rental + migration + serving. Rental is charged per
//! placed instance at the on-demand price; migration charges the
//! broadcaster-region transfer price for the original-quality volume once per
//! placement (the broadcaster's own copy included); serving charges the
//! serving-region transfer price for every viewer-hour delivered.

use thiserror::Error;

use crate::model::{AllocationPlan, LiveVideo, QualityLadder, RegionId, RttMatrix};
use crate::num::Scalar;

/// Default reserved price as a fraction of the on-demand price.
pub const DEFAULT_RESERVED_DISCOUNT: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("price vectors have mismatched lengths")]
    LengthMismatch,
    #[error("region {0}: prices must be finite and non-negative")]
    Negative(usize),
    #[error("region {0}: reserved price exceeds on-demand price")]
    ReservedAboveOnDemand(usize),
    #[error("price book has {prices} regions but rtt matrix has {rtt}")]
    RegionCount { prices: usize, rtt: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceBook<S> {
    /// On-demand instance price, $/instance-hour.
    zeta: Vec<S>,
    /// Reserved instance price, $/instance-hour.
    mu: Vec<S>,
    /// Migration transfer price charged by the broadcaster's region, $/GB.
    eta: Vec<S>,
    /// Serving transfer price charged by the serving region, $/GB.
    omega: Vec<S>,
}

impl<S: Scalar> PriceBook<S> {
    pub fn new(zeta: Vec<S>, mu: Vec<S>, eta: Vec<S>, omega: Vec<S>) -> Result<Self, PricingError> {
        let n = zeta.len();
        if mu.len() != n || eta.len() != n || omega.len() != n || n == 0 {
            return Err(PricingError::LengthMismatch);
        }
        for r in 0..n {
            let vals = [zeta[r], mu[r], eta[r], omega[r]];
            if vals.iter().any(|v| !(*v >= S::zero()) || !v.is_finite()) {
                return Err(PricingError::Negative(r));
            }
            if mu[r] > zeta[r] {
                return Err(PricingError::ReservedAboveOnDemand(r));
            }
        }
        Ok(Self { zeta, mu, eta, omega })
    }

    /// Reserved price derived as `discount * zeta` per region.
    pub fn with_reserved_discount(zeta: Vec<S>, eta: Vec<S>, omega: Vec<S>, discount: S) -> Result<Self, PricingError> {
        let mu = zeta.iter().map(|&z| z * discount).collect();
        Self::new(zeta, mu, eta, omega)
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    pub fn zeta(&self, r: RegionId) -> S {
        self.zeta[r.0]
    }

    pub fn mu(&self, r: RegionId) -> S {
        self.mu[r.0]
    }

    pub fn eta(&self, r: RegionId) -> S {
        self.eta[r.0]
    }

    pub fn omega(&self, r: RegionId) -> S {
        self.omega[r.0]
    }

    /// Same book with every reserved price reset to `discount * zeta`.
    pub fn rediscounted(&self, discount: S) -> Result<Self, PricingError> {
        Self::with_reserved_discount(self.zeta.clone(), self.eta.clone(), self.omega.clone(), discount)
    }

    /// Regions sorted by ascending on-demand price, ties by index.
    pub fn regions_by_zeta(&self) -> Vec<RegionId> {
        let mut rs: Vec<RegionId> = (0..self.len()).map(RegionId).collect();
        rs.sort_by(|a, b| {
            self.zeta(*a)
                .partial_cmp(&self.zeta(*b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        });
        rs
    }
}

/// Delays, prices and data volumes of one deployment.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudModel<S> {
    pub rtt: RttMatrix<S>,
    pub prices: PriceBook<S>,
    pub ladder: QualityLadder<S>,
}

impl<S: Scalar> CloudModel<S> {
    pub fn new(rtt: RttMatrix<S>, prices: PriceBook<S>, ladder: QualityLadder<S>) -> Result<Self, PricingError> {
        if rtt.len() != prices.len() {
            return Err(PricingError::RegionCount {
                prices: prices.len(),
                rtt: rtt.len(),
            });
        }
        Ok(Self { rtt, prices, ladder })
    }

    pub fn n_regions(&self) -> usize {
        self.rtt.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostBreakdown<S> {
    pub rental: S,
    pub migration: S,
    pub serving: S,
}

impl<S: Scalar> CostBreakdown<S> {
    pub fn total(&self) -> S {
        self.rental + self.migration + self.serving
    }
}

impl<S: Scalar> std::ops::Add for CostBreakdown<S> {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            rental: self.rental + o.rental,
            migration: self.migration + o.migration,
            serving: self.serving + o.serving,
        }
    }
}

pub fn rental_cost<'a, S: Scalar>(plans: impl IntoIterator<Item = &'a AllocationPlan>, prices: &PriceBook<S>) -> S {
    plans
        .into_iter()
        .flat_map(|p| p.placements.iter())
        .map(|&(_, r)| prices.zeta(r))
        .sum()
}

pub fn migration_cost<'a, S: Scalar>(
    plans: impl IntoIterator<Item = (&'a LiveVideo, &'a AllocationPlan)>,
    ladder: &QualityLadder<S>,
    prices: &PriceBook<S>,
) -> S {
    plans
        .into_iter()
        .map(|(v, p)| {
            let per = prices.eta(v.meta.broadcast_region) * ladder.kappa(v.meta.original_quality);
            per * S::from_count(p.placements.len() as u64)
        })
        .sum()
}

/// Serving cost of every assignment. Assignments without demand contribute
/// nothing.
pub fn serving_cost<'a, S: Scalar>(
    plans: impl IntoIterator<Item = (&'a LiveVideo, &'a AllocationPlan)>,
    ladder: &QualityLadder<S>,
    prices: &PriceBook<S>,
) -> S {
    plans
        .into_iter()
        .flat_map(|(v, p)| {
            p.assignments.iter().map(move |(&(q, w), &s)| {
                prices.omega(s) * ladder.kappa(q) * S::from_count(v.demand.get(w, q))
            })
        })
        .sum()
}

pub fn video_cost<S: Scalar>(video: &LiveVideo, plan: &AllocationPlan, ladder: &QualityLadder<S>, prices: &PriceBook<S>) -> CostBreakdown<S> {
    CostBreakdown {
        rental: rental_cost([plan], prices),
        migration: migration_cost([(video, plan)], ladder, prices),
        serving: serving_cost([(video, plan)], ladder, prices),
    }
}

pub fn total_cost<'a, S: Scalar>(
    plans: impl IntoIterator<Item = (&'a LiveVideo, &'a AllocationPlan)> + Clone,
    ladder: &QualityLadder<S>,
    prices: &PriceBook<S>,
) -> S {
    rental_cost(plans.clone().into_iter().map(|(_, p)| p), prices)
        + migration_cost(plans.clone(), ladder, prices)
        + serving_cost(plans, ladder, prices)
}

/// Cost of one slot when capacity comes from reservations plus on-demand
/// rentals. Reserved instances are charged whether used or not.
pub fn phase2_cost<'a, S: Scalar>(
    reserved: &[u64],
    on_demand_used: &[u64],
    plans: impl IntoIterator<Item = (&'a LiveVideo, &'a AllocationPlan)> + Clone,
    ladder: &QualityLadder<S>,
    prices: &PriceBook<S>,
) -> S {
    let reserved_cost: S = reserved
        .iter()
        .enumerate()
        .map(|(r, &k)| prices.mu(RegionId(r)) * S::from_count(k))
        .sum();
    let on_demand_cost: S = on_demand_used
        .iter()
        .enumerate()
        .map(|(r, &k)| prices.zeta(RegionId(r)) * S::from_count(k))
        .sum();
    reserved_cost + on_demand_cost + migration_cost(plans.clone(), ladder, prices) + serving_cost(plans, ladder, prices)
}
