//! Turning forecast instance counts into per-slot reservations.

use std::collections::BTreeMap;

use crate::model::SlotIndex;
use crate::num::Scalar;

use super::{ForecastError, Forecaster, InstanceSeries};

/// Reserved instance counts per slot and region.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReservationPlan {
    n_regions: usize,
    slots: BTreeMap<SlotIndex, Vec<u64>>,
}

impl ReservationPlan {
    pub fn new(n_regions: usize) -> Self {
        Self {
            n_regions,
            slots: BTreeMap::new(),
        }
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn insert(&mut self, slot: SlotIndex, counts: Vec<u64>) {
        assert_eq!(counts.len(), self.n_regions, "one count per region");
        self.slots.insert(slot, counts);
    }

    pub fn get(&self, slot: SlotIndex) -> Option<&[u64]> {
        self.slots.get(&slot).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SlotIndex, &[u64])> {
        self.slots.iter().map(|(&s, v)| (s, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Rounds a prediction up to a whole instance count. A small tolerance keeps
/// values like `3.0000001` at 3; negative and non-finite predictions give 0.
pub fn to_reserved_count<S: Scalar>(prediction: S) -> u64 {
    let p = prediction.as_f64();
    if !p.is_finite() || p <= 0.0 {
        return 0;
    }
    (p - 1e-6).ceil().max(0.0) as u64
}

/// Reserved counts for the slot `steps` past the end of each history, one
/// region per series. Each forecaster sees the last `window` counts.
pub fn reservation_pipeline<S: Scalar>(
    history: &[InstanceSeries],
    models: &[&dyn Forecaster<S>],
    window: usize,
    steps: usize,
) -> Result<Vec<u64>, ForecastError> {
    assert_eq!(history.len(), models.len(), "one model per region");
    history
        .iter()
        .zip(models)
        .map(|(series, model)| {
            if series.len() < window {
                return Err(ForecastError::InsufficientHistory {
                    region: series.region(),
                    window,
                });
            }
            let tail = series.values::<S>()[series.len() - window..].to_vec();
            Ok(to_reserved_count(model.predict_ahead(&tail, steps.max(1))?))
        })
        .collect()
}
