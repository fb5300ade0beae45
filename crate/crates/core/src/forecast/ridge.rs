//! Ridge-regularized autoregression.

use crate::num::Scalar;

use super::linalg::solve_dense;
use super::{check_window, ForecastError, Forecaster, SupervisedWindowSet};

/// Linear autoregression on the window with an L2 penalty on the lag
/// coefficients. The intercept is not penalized.
#[derive(Clone, Debug)]
pub struct RidgeAr<S> {
    lambda: S,
    coef: Vec<S>,
    intercept: S,
    fitted: bool,
}

impl<S: Scalar> RidgeAr<S> {
    pub fn new(lambda: S) -> Self {
        Self {
            lambda,
            coef: Vec::new(),
            intercept: S::zero(),
            fitted: false,
        }
    }

    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn coefficients(&self) -> &[S] {
        &self.coef
    }

    pub fn intercept(&self) -> S {
        self.intercept
    }
}

impl<S: Scalar> Forecaster<S> for RidgeAr<S> {
    fn name(&self) -> String {
        format!("ridge-ar(lambda={})", self.lambda)
    }

    fn fit(&mut self, train: &SupervisedWindowSet<S>) -> Result<(), ForecastError> {
        if train.is_empty() {
            return Err(ForecastError::EmptyTraining);
        }
        let p = train.window;
        let n = S::from_count(train.len() as u64);
        // Centering removes the intercept from the penalized system.
        let mut x_mean = vec![S::zero(); p];
        for row in &train.inputs {
            for (m, &v) in x_mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        x_mean.iter_mut().for_each(|m| *m /= n);
        let y_mean = train.targets.iter().copied().sum::<S>() / n;

        let mut a = vec![vec![S::zero(); p]; p];
        let mut b = vec![S::zero(); p];
        for (row, &y) in train.inputs.iter().zip(&train.targets) {
            let xc: Vec<S> = row.iter().zip(&x_mean).map(|(&v, &m)| v - m).collect();
            let yc = y - y_mean;
            for i in 0..p {
                b[i] += xc[i] * yc;
                for j in i..p {
                    a[i][j] += xc[i] * xc[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[i][j] = a[j][i];
            }
            a[i][i] += self.lambda;
        }
        let rel_eps = S::epsilon() * S::lit(64.0);
        let coef = solve_dense(a, b, rel_eps).ok_or(ForecastError::Singular {
            lambda: self.lambda.as_f64(),
        })?;
        self.intercept = y_mean - coef.iter().zip(&x_mean).map(|(&c, &m)| c * m).sum::<S>();
        self.coef = coef;
        self.fitted = true;
        Ok(())
    }

    fn predict(&self, window: &[S]) -> Result<S, ForecastError> {
        check_window(self.fitted.then_some(self.coef.len()), window)?;
        Ok(self.intercept + self.coef.iter().zip(window).map(|(&c, &x)| c * x).sum::<S>())
    }
}
