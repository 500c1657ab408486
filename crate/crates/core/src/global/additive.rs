use serde::{Deserialize, Serialize};

use crate::blackbox::{Blackbox, TrainingInfo};
use crate::error::{Error, Result};
use crate::linalg::{logit, sigmoid, softplus, Matrix};
use crate::metrics::fidelity::threshold;

/// What the additive surrogate is trained to reproduce.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdditiveTarget {
    /// Blackbox outputs thresholded at 0.5.
    #[default]
    Thresholded,
    /// Raw blackbox probabilities as soft labels.
    Probabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdditiveConfig {
    pub bins: usize,
    pub max_cycles: usize,
    pub tol: f64,
    pub target: AdditiveTarget,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        Self {
            bins: 32,
            max_cycles: 50,
            tol: 1e-6,
            target: AdditiveTarget::Thresholded,
        }
    }
}

/// Piecewise-constant function of one encoded feature. `values[b]` applies
/// to inputs with exactly `b` edges strictly below them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub feature: usize,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl ShapeFunction {
    pub fn bin(&self, v: f64) -> usize {
        self.edges.partition_point(|e| *e < v)
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.values[self.bin(v)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveSurrogate {
    pub intercept: f64,
    pub shapes: Vec<ShapeFunction>,
    pub config: AdditiveConfig,
    pub info: TrainingInfo,
}

impl AdditiveSurrogate {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.shapes.iter().map(|s| s.eval(x[s.feature])).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

impl Blackbox for AdditiveSurrogate {
    fn n_features(&self) -> usize {
        self.shapes.len()
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        self.predict_row(x)
    }
}

/// Bin edges: midpoints between consecutive distinct values when there are
/// at most `bins` of them, otherwise midpoints just below quantile cuts.
fn bin_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mid = |a: f64, b: f64| a + (b - a) / 2.0;
    if distinct.len() <= bins {
        return distinct.windows(2).map(|w| mid(w[0], w[1])).collect();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = Vec::with_capacity(bins - 1);
    for q in 1..bins {
        let cut = sorted[q * n / bins];
        let pos = distinct.partition_point(|d| *d < cut);
        if pos == 0 {
            continue;
        }
        let e = mid(distinct[pos - 1], cut);
        if edges.last().is_none_or(|last| e > *last) {
            edges.push(e);
        }
    }
    edges
}

fn mean_loss(eta: &[f64], y: &[f64]) -> f64 {
    eta.iter().zip(y).map(|(e, t)| softplus(*e) - t * e).sum::<f64>() / eta.len() as f64
}

/// Newton step for a constant shift of `eta` over `rows`, halved until the
/// loss on those rows does not increase. Returns the accepted shift.
fn newton_shift(eta: &[f64], y: &[f64], rows: &[usize]) -> f64 {
    let mut g = 0.0;
    let mut h = 0.0;
    for &i in rows {
        let p = sigmoid(eta[i]);
        g += p - y[i];
        h += p * (1.0 - p);
    }
    if g == 0.0 {
        return 0.0;
    }
    let loss_at = |delta: f64| -> f64 {
        rows.iter()
            .map(|&i| {
                let e = eta[i] + delta;
                softplus(e) - y[i] * e
            })
            .sum()
    };
    let base = loss_at(0.0);
    let mut step = -g / h.max(1e-12);
    for _ in 0..60 {
        if step.is_finite() && loss_at(step) < base {
            return step;
        }
        step /= 2.0;
    }
    0.0
}

/// Cyclic backfitting of a logistic additive model on labels in [0, 1].
pub fn fit_additive(x: &Matrix, y: &[f64], config: &AdditiveConfig) -> Result<AdditiveSurrogate> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if y.len() != n {
        return Err(Error::InvalidArgument("target count differs from row count".into()));
    }
    if config.bins < 2 {
        return Err(Error::InvalidArgument("additive surrogate needs at least 2 bins".into()));
    }
    let d = x.ncols();
    let mut shapes = Vec::with_capacity(d);
    let mut bin_of = Vec::with_capacity(d);
    let mut members = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let edges = bin_edges(&col, config.bins);
        let shape = ShapeFunction {
            feature: j,
            values: vec![0.0; edges.len() + 1],
            edges,
        };
        let bins: Vec<usize> = col.iter().map(|&v| shape.bin(v)).collect();
        let mut m = vec![Vec::new(); shape.values.len()];
        for (i, &b) in bins.iter().enumerate() {
            m[b].push(i);
        }
        bin_of.push(bins);
        members.push(m);
        shapes.push(shape);
    }
    let base_rate = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let mut intercept = logit(base_rate);
    let mut eta = vec![intercept; n];
    let all: Vec<usize> = (0..n).collect();
    let mut history = vec![mean_loss(&eta, y)];
    let mut converged = false;
    let mut cycles = 0;
    while cycles < config.max_cycles {
        cycles += 1;
        for j in 0..d {
            for (b, rows) in members[j].iter().enumerate() {
                if rows.is_empty() {
                    continue;
                }
                let delta = newton_shift(&eta, y, rows);
                if delta != 0.0 {
                    shapes[j].values[b] += delta;
                    for &i in rows {
                        eta[i] += delta;
                    }
                }
            }
            // Move the shape's training mean into the intercept; eta is unchanged.
            let mean = bin_of[j].iter().map(|&b| shapes[j].values[b]).sum::<f64>() / n as f64;
            for v in &mut shapes[j].values {
                *v -= mean;
            }
            intercept += mean;
        }
        let delta = newton_shift(&eta, y, &all);
        intercept += delta;
        for e in &mut eta {
            *e += delta;
        }
        let loss = mean_loss(&eta, y);
        let improvement = history.last().copied().unwrap_or(f64::INFINITY) - loss;
        history.push(loss);
        if improvement < config.tol {
            converged = true;
            break;
        }
    }
    Ok(AdditiveSurrogate {
        intercept,
        shapes,
        config: config.clone(),
        info: TrainingInfo {
            converged,
            iterations: cycles,
            final_loss: *history.last().expect("nonempty"),
            loss_history: history,
        },
    })
}

/// Additive model imitating the blackbox on `x`.
pub fn fit_additive_surrogate(model: &dyn Blackbox, x: &Matrix, config: &AdditiveConfig) -> Result<AdditiveSurrogate> {
    let probs = model.predict_batch(x);
    let y: Vec<f64> = match config.target {
        AdditiveTarget::Thresholded => probs.into_iter().map(|p| f64::from(threshold(p))).collect(),
        AdditiveTarget::Probabilities => probs,
    };
    fit_additive(x, &y, config)
}
