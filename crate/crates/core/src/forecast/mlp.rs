//! One-hidden-layer ReLU regressor trained with Adam on minibatches.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::num::Scalar;

use super::{check_window, ForecastError, Forecaster, SupervisedWindowSet};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.003,
            seed: 0,
        }
    }
}

/// Bare network: `y = w2 . relu(W1 x + b1) + b2`.
///
/// Parameters are flattened as `[W1 (row-major, hidden x inputs), b1, w2, b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNet<S> {
    inputs: usize,
    hidden: usize,
    params: Vec<S>,
}

impl<S: Scalar> MlpNet<S> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let n = hidden * inputs + 2 * hidden + 1;
        let mut params = vec![S::zero(); n];
        let a1 = (6.0 / inputs as f64).sqrt();
        for p in &mut params[..hidden * inputs] {
            *p = S::lit(rng.gen_range(-a1..a1));
        }
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w2 = hidden * inputs + hidden;
        for p in &mut params[w2..w2 + hidden] {
            *p = S::lit(rng.gen_range(-a2..a2));
        }
        Self { inputs, hidden, params }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        (b1, b1 + self.hidden, b1 + 2 * self.hidden)
    }

    pub fn forward(&self, x: &[S]) -> S {
        let (b1, w2, b2) = self.offsets();
        let mut y = self.params[b2];
        for h in 0..self.hidden {
            let row = &self.params[h * self.inputs..(h + 1) * self.inputs];
            let z = self.params[b1 + h] + row.iter().zip(x).map(|(&w, &v)| w * v).sum::<S>();
            if z > S::zero() {
                y += self.params[w2 + h] * z;
            }
        }
        y
    }

    /// Mean of `0.5 (y - t)^2` over the rows and its gradient with respect
    /// to the flattened parameters.
    pub fn loss_and_gradient(&self, xs: &[&[S]], ts: &[S]) -> (S, Vec<S>) {
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![S::zero(); self.params.len()];
        let mut loss = S::zero();
        let mut z = vec![S::zero(); self.hidden];
        for (x, &t) in xs.iter().zip(ts) {
            let mut y = self.params[b2];
            for (h, zh) in z.iter_mut().enumerate() {
                let row = &self.params[h * self.inputs..(h + 1) * self.inputs];
                *zh = self.params[b1 + h] + row.iter().zip(x.iter()).map(|(&w, &v)| w * v).sum::<S>();
                if *zh > S::zero() {
                    y += self.params[w2 + h] * *zh;
                }
            }
            let err = y - t;
            loss += S::lit(0.5) * err * err;
            grad[b2] += err;
            for (h, &zh) in z.iter().enumerate() {
                if zh > S::zero() {
                    grad[w2 + h] += err * zh;
                    let back = err * self.params[w2 + h];
                    grad[b1 + h] += back;
                    for (g, &v) in grad[h * self.inputs..(h + 1) * self.inputs].iter_mut().zip(x.iter()) {
                        *g += back * v;
                    }
                }
            }
        }
        let n = S::from_count(ts.len().max(1) as u64);
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

/// Forecaster wrapper: inputs and targets share one affine normalization
/// learned from the training set so recursive prediction stays consistent.
#[derive(Clone, Debug)]
pub struct Mlp<S> {
    config: MlpConfig,
    net: Option<MlpNet<S>>,
    shift: S,
    scale: S,
}

impl<S: Scalar> Mlp<S> {
    pub fn new(config: MlpConfig) -> Self {
        Self {
            config,
            net: None,
            shift: S::zero(),
            scale: S::one(),
        }
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn net(&self) -> Option<&MlpNet<S>> {
        self.net.as_ref()
    }
}

impl<S: Scalar> Forecaster<S> for Mlp<S> {
    fn name(&self) -> String {
        format!("mlp(hidden={})", self.config.hidden)
    }

    fn fit(&mut self, train: &SupervisedWindowSet<S>) -> Result<(), ForecastError> {
        if train.is_empty() {
            return Err(ForecastError::EmptyTraining);
        }
        let cfg = &self.config;
        let all: Vec<S> = train.inputs.iter().flatten().chain(&train.targets).copied().collect();
        let n_all = S::from_count(all.len() as u64);
        let shift = all.iter().copied().sum::<S>() / n_all;
        let var = all.iter().map(|&v| (v - shift) * (v - shift)).sum::<S>() / n_all;
        let scale = if var > S::zero() { var.sqrt() } else { S::one() };
        let xs: Vec<Vec<S>> = train
            .inputs
            .iter()
            .map(|r| r.iter().map(|&v| (v - shift) / scale).collect())
            .collect();
        let ts: Vec<S> = train.targets.iter().map(|&v| (v - shift) / scale).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = MlpNet::new(train.window, cfg.hidden, &mut rng);
        let np = net.params.len();
        let (beta1, beta2, eps) = (S::lit(0.9), S::lit(0.999), S::lit(1e-8));
        let lr = S::lit(cfg.learning_rate);
        let mut m = vec![S::zero(); np];
        let mut v = vec![S::zero(); np];
        let (mut b1t, mut b2t) = (S::one(), S::one());
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let batch = cfg.batch_size.max(1);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = S::zero();
            for chunk in order.chunks(batch) {
                let bx: Vec<&[S]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
                let bt: Vec<S> = chunk.iter().map(|&i| ts[i]).collect();
                let (loss, grad) = net.loss_and_gradient(&bx, &bt);
                epoch_loss += loss;
                b1t *= beta1;
                b2t *= beta2;
                for k in 0..np {
                    m[k] = beta1 * m[k] + (S::one() - beta1) * grad[k];
                    v[k] = beta2 * v[k] + (S::one() - beta2) * grad[k] * grad[k];
                    let mh = m[k] / (S::one() - b1t);
                    let vh = v[k] / (S::one() - b2t);
                    net.params[k] -= lr * mh / (vh.sqrt() + eps);
                }
            }
            if !epoch_loss.is_finite() {
                return Err(ForecastError::Diverged {
                    epoch,
                    loss: epoch_loss.as_f64(),
                });
            }
        }
        self.net = Some(net);
        self.shift = shift;
        self.scale = scale;
        Ok(())
    }

    fn predict(&self, window: &[S]) -> Result<S, ForecastError> {
        check_window(self.net.as_ref().map(|n| n.inputs), window)?;
        let net = self.net.as_ref().expect("checked");
        let x: Vec<S> = window.iter().map(|&v| (v - self.shift) / self.scale).collect();
        Ok(net.forward(&x) * self.scale + self.shift)
    }
}
