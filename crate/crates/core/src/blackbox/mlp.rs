use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainingInfo;
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus, Matrix};
use crate::rng;

/// Optimizer defaults: Adam with learning rate 1e-3, minibatches of 32,
/// up to 200 epochs, early stop after 10 epochs without a 1e-4 improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub tol: f64,
    pub n_iter_no_change: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 100,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 32,
            l2: 1e-4,
            tol: 1e-4,
            n_iter_no_change: 10,
        }
    }
}

/// One hidden ReLU layer, sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub hidden_units: usize,
    /// Row-major `hidden_units x n_features`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub config: MlpConfig,
    pub seed: u64,
    pub info: TrainingInfo,
}

impl MlpModel {
    /// Glorot-uniform initialization from `seed`.
    pub fn init(n_features: usize, config: &MlpConfig, seed: u64) -> Result<Self> {
        if config.hidden_units == 0 {
            return Err(Error::InvalidArgument("hidden_units must be at least 1".into()));
        }
        let h = config.hidden_units;
        let mut rng = rng::seeded(seed);
        let bound1 = (6.0 / (n_features + h) as f64).sqrt();
        let bound2 = (6.0 / (h + 1) as f64).sqrt();
        let w1 = (0..h * n_features)
            .map(|_| rng.random_range(-bound1..bound1))
            .collect();
        let b1 = (0..h).map(|_| rng.random_range(-bound1..bound1)).collect();
        let w2 = (0..h).map(|_| rng.random_range(-bound2..bound2)).collect();
        let b2 = rng.random_range(-bound2..bound2);
        Ok(Self {
            n_features,
            hidden_units: h,
            w1,
            b1,
            w2,
            b2,
            config: config.clone(),
            seed,
            info: TrainingInfo::default(),
        })
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let d = self.n_features;
        let mut z = self.b2;
        for (u, hu) in hidden.iter_mut().enumerate() {
            let row = &self.w1[u * d..(u + 1) * d];
            let mut a = self.b1[u];
            for (w, xi) in row.iter().zip(x) {
                a += w * xi;
            }
            *hu = a.max(0.0);
            z += self.w2[u] * *hu;
        }
        z
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.hidden_units];
        sigmoid(self.forward(x, &mut hidden))
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            **p -= lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Minibatch Adam on binary cross-entropy. Single-threaded and fully
/// determined by `seed` (initialization and per-epoch shuffles).
pub fn train_mlp(x: &Matrix, labels: &[u8], config: &MlpConfig, seed: u64) -> Result<MlpModel> {
    if x.nrows() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut model = MlpModel::init(x.ncols(), config, seed)?;
    let d = model.n_features;
    let h = model.hidden_units;
    let n_params = h * d + h + h + 1;
    let mut adam = Adam::new(n_params);
    let mut rng = rng::seeded(rng::derive_seed(seed, 1));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let batch = config.batch_size.max(1);

    let mut grads = vec![0.0; n_params];
    let mut hidden = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut epochs_run = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let (gw1, rest) = grads.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            for &i in chunk {
                let xi = x.row(i);
                let yi = labels[i] as f64;
                let z = model.forward(xi, &mut hidden);
                epoch_loss += softplus(z) - yi * z;
                let dz = sigmoid(z) - yi;
                gb2[0] += dz;
                for u in 0..h {
                    gw2[u] += dz * hidden[u];
                    dh[u] = if hidden[u] > 0.0 { dz * model.w2[u] } else { 0.0 };
                }
                for u in 0..h {
                    if dh[u] == 0.0 {
                        continue;
                    }
                    gb1[u] += dh[u];
                    let row = &mut gw1[u * d..(u + 1) * d];
                    for (g, xv) in row.iter_mut().zip(xi) {
                        *g += dh[u] * xv;
                    }
                }
            }
            let m = chunk.len() as f64;
            for g in grads.iter_mut() {
                *g /= m;
            }
            for (g, w) in grads[..h * d].iter_mut().zip(&model.w1) {
                *g += config.l2 * w;
            }
            for (g, w) in grads[h * d + h..h * d + 2 * h].iter_mut().zip(&model.w2) {
                *g += config.l2 * w;
            }
            let mut params: Vec<&mut f64> = model
                .w1
                .iter_mut()
                .chain(model.b1.iter_mut())
                .chain(model.w2.iter_mut())
                .chain(std::iter::once(&mut model.b2))
                .collect();
            adam.step(&mut params, &grads, config.learning_rate);
        }
        epochs_run += 1;
        let loss = epoch_loss / x.nrows() as f64;
        history.push(loss);
        if loss > best - config.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(loss);
        if stale >= config.n_iter_no_change {
            converged = true;
            break;
        }
    }
    if !converged && config.epochs > 0 {
        log::debug!("mlp stopped at the {epochs_run}-epoch cap before the loss plateaued");
    }
    model.info = TrainingInfo {
        converged,
        iterations: epochs_run,
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        loss_history: history,
    };
    Ok(model)
}
