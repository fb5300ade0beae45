//! Candidate forecasters and per-region model selection.

use crate::num::Scalar;

use super::{mae, r_squared, ForecastError, Forecaster, Mlp, MlpConfig, RidgeAr, SeasonalNaive, SupervisedWindowSet};

/// Test-set scores of one candidate. `error` is set when fitting or
/// prediction failed; `r2` is `None` when the test actuals are constant.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub name: String,
    pub r2: Option<f64>,
    pub mae: Option<f64>,
    pub error: Option<String>,
}

pub struct Selection<S> {
    pub model: Box<dyn Forecaster<S>>,
    pub index: usize,
    pub scores: Vec<CandidateScore>,
}

impl<S> std::fmt::Debug for Selection<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Selection")
            .field("index", &self.index)
            .field("scores", &self.scores)
            .finish()
    }
}

/// The candidate grid used by the pipeline: seasonal naive, ridge at three
/// penalties, and two MLP widths. `mlp` supplies everything but the width.
pub fn default_candidates<S: Scalar>(window: usize, mlp: &MlpConfig) -> Vec<Box<dyn Forecaster<S>>> {
    let mut out: Vec<Box<dyn Forecaster<S>>> = vec![Box::new(SeasonalNaive::new(window.min(24)))];
    for lambda in [0.01, 0.1, 1.0] {
        out.push(Box::new(RidgeAr::new(S::lit(lambda))));
    }
    for hidden in [32, 100] {
        out.push(Box::new(Mlp::new(MlpConfig { hidden, ..mlp.clone() })));
    }
    out
}

/// Fits every candidate on `train` and keeps the one with the highest test
/// R², first candidate winning ties. When no candidate has a defined R², the
/// lowest MAE wins instead.
pub fn select_model<S: Scalar>(
    candidates: Vec<Box<dyn Forecaster<S>>>,
    train: &SupervisedWindowSet<S>,
    test: &SupervisedWindowSet<S>,
) -> Result<Selection<S>, ForecastError> {
    let mut scores = Vec::with_capacity(candidates.len());
    let mut fitted = Vec::with_capacity(candidates.len());
    for mut c in candidates {
        let name = c.name();
        let outcome = c.fit(train).and_then(|_| c.predict_all(test));
        match outcome {
            Ok(pred) => {
                let r2 = match r_squared(&test.targets, &pred) {
                    Ok(v) => Some(v.as_f64()),
                    Err(ForecastError::DegenerateActuals) => None,
                    Err(e) => return Err(e),
                };
                let m = mae(&test.targets, &pred)?.as_f64();
                let ok = r2.is_none_or(f64::is_finite) && m.is_finite();
                scores.push(CandidateScore {
                    name,
                    r2,
                    mae: Some(m),
                    error: (!ok).then(|| "non-finite score".to_string()),
                });
                fitted.push(ok.then_some(c));
            }
            Err(e) => {
                scores.push(CandidateScore {
                    name,
                    r2: None,
                    mae: None,
                    error: Some(e.to_string()),
                });
                fitted.push(None);
            }
        }
    }
    let usable = |i: &usize| fitted[*i].is_some();
    let by_r2 = (0..scores.len())
        .filter(usable)
        .filter(|&i| scores[i].r2.is_some())
        .fold(None::<usize>, |best, i| match best {
            Some(b) if scores[b].r2 >= scores[i].r2 => Some(b),
            _ => Some(i),
        });
    let index = by_r2
        .or_else(|| {
            (0..scores.len()).filter(usable).fold(None::<usize>, |best, i| match best {
                Some(b) if scores[b].mae <= scores[i].mae => Some(b),
                _ => Some(i),
            })
        })
        .ok_or(ForecastError::NoCandidate)?;
    let model = fitted.swap_remove(index).expect("usable");
    Ok(Selection { model, index, scores })
}
