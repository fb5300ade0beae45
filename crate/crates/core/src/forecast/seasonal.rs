//! Seasonal naive baseline.

use crate::num::Scalar;

use super::{check_window, ForecastError, Forecaster, SupervisedWindowSet};

/// Repeats the value observed `period` slots ago.
#[derive(Clone, Debug)]
pub struct SeasonalNaive {
    period: usize,
    window: Option<usize>,
}

impl SeasonalNaive {
    pub fn new(period: usize) -> Self {
        Self { period, window: None }
    }

    /// Fitted instance for a known window length.
    pub fn with_window(period: usize, window: usize) -> Result<Self, ForecastError> {
        if period == 0 || period > window {
            return Err(ForecastError::PeriodTooLong { period, window });
        }
        Ok(Self {
            period,
            window: Some(window),
        })
    }
}

impl<S: Scalar> Forecaster<S> for SeasonalNaive {
    fn name(&self) -> String {
        format!("seasonal-naive(p={})", self.period)
    }

    fn fit(&mut self, train: &SupervisedWindowSet<S>) -> Result<(), ForecastError> {
        *self = Self::with_window(self.period, train.window)?;
        Ok(())
    }

    fn predict(&self, window: &[S]) -> Result<S, ForecastError> {
        check_window(self.window, window)?;
        Ok(window[window.len() - self.period])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::r_squared;

    #[test]
    fn exact_on_pure_period() {
        let values: Vec<f64> = (0..24 * 6).map(|t| ((t % 24) as f64 * 0.7).sin() * 10.0 + 20.0).collect();
        let set = SupervisedWindowSet::from_values(&values, 24).unwrap();
        let (train, test) = set.split(0.7).unwrap();
        let mut m = SeasonalNaive::new(24);
        Forecaster::<f64>::fit(&mut m, &train).unwrap();
        let pred = m.predict_all(&test).unwrap();
        assert_eq!(r_squared(&test.targets, &pred).unwrap(), 1.0);
    }

    #[test]
    fn constant_and_last_value() {
        let set = SupervisedWindowSet::from_values(&[5.0; 30], 24).unwrap();
        let mut m = SeasonalNaive::new(24);
        m.fit(&set).unwrap();
        assert_eq!(m.predict(&[5.0; 24]).unwrap(), 5.0);

        let mut last = SeasonalNaive::new(1);
        Forecaster::<f64>::fit(&mut last, &set).unwrap();
        let w: Vec<f64> = (0..24).map(f64::from).collect();
        assert_eq!(last.predict(&w).unwrap(), 23.0);
    }

    #[test]
    fn period_longer_than_window() {
        let set = SupervisedWindowSet::from_values(&[1.0; 30], 24).unwrap();
        let mut m = SeasonalNaive::new(25);
        assert!(matches!(
            Forecaster::<f64>::fit(&mut m, &set),
            Err(ForecastError::PeriodTooLong { .. })
        ));
        assert!(matches!(
            Forecaster::<f64>::predict(&SeasonalNaive::new(3), &[1.0; 24]),
            Err(ForecastError::NotFitted)
        ));
    }
}
