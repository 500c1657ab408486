use serde::{Deserialize, Serialize};

use super::TrainingInfo;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, sigmoid, softplus, Matrix};

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_NEWTON_ITERATIONS: usize = 100;

/// L2-regularized logistic regression. The intercept is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2: f64,
    pub info: TrainingInfo,
}

impl LogisticModel {
    #[inline]
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }

    #[inline]
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

/// Minimizes mean log-loss plus `l2/2 * |w|^2` by damped Newton iterations.
/// Stops when the gradient norm falls below 1e-6; when the iteration cap is
/// hit the last (best) iterate is returned with `converged = false`.
pub fn train_logistic(x: &Matrix, labels: &[u8], l2: f64) -> Result<LogisticModel> {
    train_logistic_weighted(x, labels, None, l2)
}

/// As [`train_logistic`], with optional per-row weights (normalized to mean 1).
pub fn train_logistic_weighted(
    x: &Matrix,
    labels: &[u8],
    row_weights: Option<&[f64]>,
    l2: f64,
) -> Result<LogisticModel> {
    if x.nrows() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if !(l2 >= 0.0) {
        return Err(Error::InvalidArgument("l2 strength must be nonnegative".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let n = x.nrows();
    let d = x.ncols();
    let p = d + 1;
    let rw: Vec<f64> = match row_weights {
        Some(w) => {
            let m = w.iter().sum::<f64>() / n as f64;
            w.iter().map(|v| v / m).collect()
        }
        None => vec![1.0; n],
    };
    let y: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let objective = |w: &[f64], b: f64| -> f64 {
        let data: f64 = x
            .rows_iter()
            .zip(&y)
            .zip(&rw)
            .map(|((r, &yi), &ri)| {
                let eta = b + dot(w, r);
                ri * (softplus(eta) - yi * eta)
            })
            .sum();
        data / n as f64 + 0.5 * l2 * dot(w, w)
    };

    let base = (positives as f64 / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let mut w = vec![0.0; d];
    let mut b = (base / (1.0 - base)).ln();
    let mut loss = objective(&w, b);
    let mut history = vec![loss];
    let mut converged = false;
    let mut iterations = 0;

    let mut grad = vec![0.0; p];
    let mut hess = vec![0.0; p * p];
    while iterations < MAX_NEWTON_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for ((r, &yi), &ri) in x.rows_iter().zip(&y).zip(&rw) {
            let mu = sigmoid(b + dot(&w, r));
            let resid = ri * (mu - yi);
            let curv = ri * mu * (1.0 - mu);
            for j in 0..d {
                grad[j] += resid * r[j];
                let cj = curv * r[j];
                for k in 0..=j {
                    hess[j * p + k] += cj * r[k];
                }
                hess[d * p + j] += cj;
            }
            grad[d] += resid;
            hess[d * p + d] += curv;
        }
        let nf = n as f64;
        for j in 0..p {
            grad[j] /= nf;
            for k in 0..=j {
                hess[j * p + k] /= nf;
            }
        }
        for j in 0..d {
            grad[j] += l2 * w[j];
            hess[j * p + j] += l2;
        }
        for j in 0..p {
            for k in 0..j {
                hess[k * p + j] = hess[j * p + k];
            }
        }
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        iterations += 1;

        let step = newton_direction(&hess, &grad, p);
        let slope = dot(&grad, &step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi - t * si).collect();
            let b_new = b - t * step[d];
            let loss_new = objective(&w_new, b_new);
            if loss_new <= loss - 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                loss = loss_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        history.push(loss);
        if !accepted {
            // No decrease representable in floating point: at the optimum.
            converged = gnorm < 1e-4;
            break;
        }
    }

    if !converged {
        log::warn!(
            "logistic regression (l2 = {l2}) did not reach gradient norm {GRADIENT_TOLERANCE} in {iterations} iterations"
        );
    }
    Ok(LogisticModel {
        weights: w,
        intercept: b,
        l2,
        info: TrainingInfo {
            converged,
            iterations,
            final_loss: loss,
            loss_history: history,
        },
    })
}

fn newton_direction(hess: &[f64], grad: &[f64], p: usize) -> Vec<f64> {
    let scale = (0..p).map(|i| hess[i * p + i]).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut h = hess.to_vec();
        for i in 0..p {
            h[i * p + i] += jitter;
        }
        if let Ok(step) = cholesky_solve(&h, grad, p) {
            return step;
        }
        jitter = if jitter == 0.0 { 1e-10 * scale } else { jitter * 100.0 };
    }
    // Gradient descent fallback, scaled by the curvature bound.
    grad.iter().map(|g| g / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        let data = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    fn accuracy(m: &LogisticModel, x: &Matrix, y: &[u8]) -> f64 {
        x.rows_iter()
            .zip(y)
            .filter(|(r, &yi)| u8::from(m.predict_proba(r) >= 0.5) == yi)
            .count() as f64
            / y.len() as f64
    }

    #[test]
    fn separable_data_fit_with_tiny_penalty() {
        // Known separating hyperplane 2 x0 - x1 + 0.3 = 0 with a margin band removed.
        let raw = gaussian(600, 2, 1);
        let rows: Vec<Vec<f64>> = raw
            .rows_iter()
            .filter(|r| (2.0 * r[0] - r[1] + 0.3).abs() > 0.1)
            .map(|r| r.to_vec())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<u8> = x
            .rows_iter()
            .map(|r| u8::from(2.0 * r[0] - r[1] + 0.3 > 0.0))
            .collect();
        let m = train_logistic(&x, &y, 1e-6).unwrap();
        assert!(accuracy(&m, &x, &y) >= 0.99);
    }

    #[test]
    fn heavy_penalty_shrinks_to_base_rate() {
        let x = gaussian(400, 3, 2);
        let y: Vec<u8> = x.rows_iter().map(|r| u8::from(r[0] + 0.2 > 0.0)).collect();
        let m = train_logistic(&x, &y, 1e6).unwrap();
        let norm = dot(&m.weights, &m.weights).sqrt();
        assert!(norm < 1e-3, "norm {norm}");
        let base = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        assert!((m.predict_proba(x.row(0)) - base).abs() < 1e-3);
    }

    #[test]
    fn sign_of_first_feature() {
        let mut rows = Vec::new();
        for i in 0..200 {
            let v = (i as f64 - 99.5) / 50.0;
            rows.push(vec![v, ((i * 37) % 11) as f64 - 5.0]);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<u8> = x.rows_iter().map(|r| u8::from(r[0] > 0.0)).collect();
        let m = train_logistic(&x, &y, 1e-2).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.info.converged);
    }

    #[test]
    fn loss_is_non_increasing() {
        let x = gaussian(500, 4, 3);
        let y: Vec<u8> = x
            .rows_iter()
            .enumerate()
            .map(|(i, r)| u8::from(r[0] - r[2] + 0.5 * ((i % 7) as f64 - 3.0) > 0.0))
            .collect();
        for l2 in [0.0, 1e-3, 1.0] {
            let m = train_logistic(&x, &y, l2).unwrap();
            for w in m.info.loss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = gaussian(10, 2, 4);
        assert!(matches!(train_logistic(&x, &[1; 10], 1.0), Err(Error::SingleClass)));
    }
}
