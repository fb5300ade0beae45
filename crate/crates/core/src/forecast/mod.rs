//! Per-region instance forecasting.
//!
//! Hourly instance counts from the offline optimizer are turned into a
//! supervised problem with a sliding window: the last `window` counts are the
//! input, the next count is the target. Forecasters are fitted per region and
//! chosen by test-set R².

mod linalg;
mod mlp;
mod reservation;
mod ridge;
mod seasonal;
mod select;

use thiserror::Error;

use crate::model::{RegionId, SlotIndex};
use crate::num::Scalar;

pub use mlp::{Mlp, MlpConfig, MlpNet};
pub use reservation::{reservation_pipeline, to_reserved_count, ReservationPlan};
pub use ridge::RidgeAr;
pub use seasonal::SeasonalNaive;
pub use select::{default_candidates, select_model, CandidateScore, Selection};

/// Default sliding-window length, hours.
pub const DEFAULT_WINDOW: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("series of length {len} is too short for a window of {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("sequences must have equal length >= {min} (got {left} and {right})")]
    LengthMismatch { left: usize, right: usize, min: usize },
    #[error("actual values have zero variance; R² is undefined")]
    DegenerateActuals,
    #[error("seasonal period {period} exceeds window {window}")]
    PeriodTooLong { period: usize, window: usize },
    #[error("normal equations are numerically singular (lambda = {lambda}); raise the regularization")]
    Singular { lambda: f64 },
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("forecaster used before fitting")]
    NotFitted,
    #[error("expected an input window of {expected} values, got {got}")]
    WindowLength { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("no candidate model could be fitted")]
    NoCandidate,
    #[error("region {region}: fewer than {window} history slots")]
    InsufficientHistory { region: RegionId, window: usize },
    #[error("train fraction {0} leaves an empty train or test split")]
    BadSplit(f64),
}

/// Hourly optimal instance counts of one region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceSeries {
    region: RegionId,
    start: SlotIndex,
    counts: Vec<u64>,
}

impl InstanceSeries {
    pub fn new(region: RegionId, start: SlotIndex, counts: Vec<u64>) -> Self {
        Self { region, start, counts }
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    pub fn start(&self) -> SlotIndex {
        self.start
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn push(&mut self, count: u64) {
        self.counts.push(count);
    }

    /// Count at an absolute slot, if covered.
    pub fn at(&self, slot: SlotIndex) -> Option<u64> {
        slot.0
            .checked_sub(self.start.0)
            .and_then(|i| self.counts.get(i as usize).copied())
    }

    /// Prefix ending just before `slot`.
    pub fn until(&self, slot: SlotIndex) -> InstanceSeries {
        let end = (slot.0.saturating_sub(self.start.0) as usize).min(self.counts.len());
        Self::new(self.region, self.start, self.counts[..end].to_vec())
    }

    pub fn values<S: Scalar>(&self) -> Vec<S> {
        self.counts.iter().map(|&c| S::from_count(c)).collect()
    }
}

/// Sliding-window view of a series: row `i` maps `values[i..i+window]` to
/// `values[i+window]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedWindowSet<S> {
    pub window: usize,
    pub inputs: Vec<Vec<S>>,
    pub targets: Vec<S>,
}

impl<S: Scalar> SupervisedWindowSet<S> {
    pub fn from_values(values: &[S], window: usize) -> Result<Self, ForecastError> {
        if window == 0 || values.len() <= window {
            return Err(ForecastError::SeriesTooShort {
                len: values.len(),
                window,
            });
        }
        let rows = values.len() - window;
        Ok(Self {
            window,
            inputs: (0..rows).map(|i| values[i..i + window].to_vec()).collect(),
            targets: values[window..].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Chronological split: the first `floor(len * fraction)` rows train.
    pub fn split(&self, train_fraction: f64) -> Result<(Self, Self), ForecastError> {
        let cut = (self.len() as f64 * train_fraction).floor() as usize;
        if !(0.0..=1.0).contains(&train_fraction) || cut == 0 || cut >= self.len() {
            return Err(ForecastError::BadSplit(train_fraction));
        }
        Ok((self.slice(0, cut), self.slice(cut, self.len())))
    }

    pub fn slice(&self, from: usize, to: usize) -> Self {
        Self {
            window: self.window,
            inputs: self.inputs[from..to].to_vec(),
            targets: self.targets[from..to].to_vec(),
        }
    }
}

pub fn build_windows<S: Scalar>(series: &InstanceSeries, window: usize) -> Result<SupervisedWindowSet<S>, ForecastError> {
    SupervisedWindowSet::from_values(&series.values::<S>(), window)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r_squared<S: Scalar>(actual: &[S], predicted: &[S]) -> Result<S, ForecastError> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return Err(ForecastError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
            min: 2,
        });
    }
    let n = S::from_count(actual.len() as u64);
    let mean = actual.iter().copied().sum::<S>() / n;
    let ss_tot: S = actual.iter().map(|&a| (a - mean) * (a - mean)).sum();
    if ss_tot == S::zero() {
        return Err(ForecastError::DegenerateActuals);
    }
    let ss_res: S = actual.iter().zip(predicted).map(|(&a, &p)| (a - p) * (a - p)).sum();
    Ok(S::one() - ss_res / ss_tot)
}

pub fn mae<S: Scalar>(actual: &[S], predicted: &[S]) -> Result<S, ForecastError> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(ForecastError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
            min: 1,
        });
    }
    let n = S::from_count(actual.len() as u64);
    Ok(actual.iter().zip(predicted).map(|(&a, &p)| (a - p).abs()).sum::<S>() / n)
}

/// A one-step-ahead model over a fixed-length window of past counts.
pub trait Forecaster<S: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn fit(&mut self, train: &SupervisedWindowSet<S>) -> Result<(), ForecastError>;

    fn predict(&self, window: &[S]) -> Result<S, ForecastError>;

    fn predict_all(&self, set: &SupervisedWindowSet<S>) -> Result<Vec<S>, ForecastError> {
        set.inputs.iter().map(|w| self.predict(w)).collect()
    }

    /// Predicts `steps` slots past the end of `window`, feeding each
    /// prediction back as input.
    fn predict_ahead(&self, window: &[S], steps: usize) -> Result<S, ForecastError> {
        let mut w = window.to_vec();
        let mut last = self.predict(&w)?;
        for _ in 1..steps {
            w.remove(0);
            w.push(last);
            last = self.predict(&w)?;
        }
        Ok(last)
    }
}

pub(crate) fn check_window<S>(expected: Option<usize>, window: &[S]) -> Result<(), ForecastError> {
    match expected {
        None => Err(ForecastError::NotFitted),
        Some(e) if e != window.len() => Err(ForecastError::WindowLength {
            expected: e,
            got: window.len(),
        }),
        Some(_) => Ok(()),
    }
}
