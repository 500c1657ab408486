use serde::{Deserialize, Serialize};

use super::PerturbationSet;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

/// Sparse linear model `intercept + sum_j weights[j] * x[features[j]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub features: Vec<usize>,
    pub weights: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .features
                .iter()
                .zip(&self.weights)
                .map(|(&j, w)| w * x[j])
                .sum::<f64>()
    }
}

/// Weighted ridge on the given columns with an unpenalized intercept:
/// minimizes `sum_i w_i (y_i - b - x_i.beta)^2 + lambda |beta|^2`.
pub fn weighted_ridge(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    features: &[usize],
    lambda: f64,
) -> Result<LinearFit> {
    let n = x.nrows();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(Error::InvalidArgument("ridge inputs have mismatched lengths".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("ridge lambda must be nonnegative".into()));
    }
    let p = features.len();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidArgument("sample weights must have a positive finite sum".into()));
    }
    // Centering at the weighted means removes the intercept from the system.
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for i in 0..n {
        let row = x.row(i);
        for (m, &j) in x_mean.iter_mut().zip(features) {
            *m += w[i] * row[j];
        }
        y_mean += w[i] * y[i];
    }
    for m in &mut x_mean {
        *m /= total;
    }
    y_mean /= total;
    if p == 0 {
        return Ok(LinearFit {
            intercept: y_mean,
            features: Vec::new(),
            weights: Vec::new(),
        });
    }
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut xc = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        for (c, (&j, m)) in xc.iter_mut().zip(features.iter().zip(&x_mean)) {
            *c = row[j] - m;
        }
        let yc = y[i] - y_mean;
        for a in 0..p {
            let wa = w[i] * xc[a];
            rhs[a] += wa * yc;
            for b in a..p {
                gram[a * p + b] += wa * xc[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
        gram[a * p + a] += lambda;
    }
    let beta = cholesky_solve(&gram, &rhs, p)?;
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearFit {
        intercept,
        features: features.to_vec(),
        weights: beta,
    })
}

/// Indices of the `k` largest `|coef|`, ties to the lower index, in
/// ascending index order.
pub fn top_k(coefs: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coefs.len()).collect();
    order.sort_by(|&a, &b| coefs[b].abs().total_cmp(&coefs[a].abs()).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    chosen
}

/// Ridge fit on the perturbation targets. With `k < d` a preliminary fit on
/// all features picks the `k` largest coefficients by magnitude, and the
/// model is refit on those alone.
pub fn fit_weighted_ridge(pert: &PerturbationSet, k: Option<usize>, lambda: f64) -> Result<LinearFit> {
    fit_with_weights(pert, &pert.weights, k, lambda)
}

pub(crate) fn fit_with_weights(
    pert: &PerturbationSet,
    weights: &[f64],
    k: Option<usize>,
    lambda: f64,
) -> Result<LinearFit> {
    let d = pert.samples.ncols();
    if pert.targets.len() != pert.len() {
        return Err(Error::InvalidArgument("perturbation set has no blackbox targets".into()));
    }
    let all: Vec<usize> = (0..d).collect();
    let full = weighted_ridge(&pert.samples, &pert.targets, weights, &all, lambda)?;
    match k {
        Some(k) if k > d => Err(Error::InvalidArgument(format!("feature budget {k} exceeds {d} features"))),
        Some(k) if k < d => {
            let chosen = top_k(&full.weights, k);
            weighted_ridge(&pert.samples, &pert.targets, weights, &chosen, lambda)
        }
        _ => Ok(full),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn random_set(n: usize, d: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> PerturbationSet {
        let mut r = rng::seeded(seed);
        let data: Vec<f64> = (0..n * d).map(|_| r.random_range(-2.0..2.0)).collect();
        let samples = Matrix::from_vec(n, d, data).unwrap();
        let weights = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
        let targets = samples.rows_iter().map(&f).collect();
        PerturbationSet {
            samples,
            weights,
            targets,
        }
    }

    #[test]
    fn recovers_linear_generator() {
        let p = random_set(400, 4, 1, |x| 0.3 + 1.5 * x[0] - 2.0 * x[1] + 0.25 * x[3]);
        let fit = fit_weighted_ridge(&p, None, 0.0).unwrap();
        let truth = [1.5, -2.0, 0.0, 0.25];
        assert!((fit.intercept - 0.3).abs() < 1e-6);
        for (w, t) in fit.weights.iter().zip(truth) {
            assert!((w - t).abs() < 1e-6);
        }
    }

    #[test]
    fn normal_equation_residual_is_tiny() {
        // independent oracle: the full weighted normal equations, intercept
        // column unpenalized, assembled with nalgebra
        let lambda = 0.7;
        let p = random_set(300, 5, 2, |x| (x[0] * x[1]).sin() + x[2]);
        let fit = fit_weighted_ridge(&p, None, lambda).unwrap();
        let n = p.len();
        let a = DMatrix::from_fn(n, 6, |i, j| if j == 0 { 1.0 } else { p.samples.get(i, j - 1) });
        let w = DMatrix::from_diagonal(&DVector::from_vec(p.weights.clone()));
        let y = DVector::from_vec(p.targets.clone());
        let mut pen = DMatrix::identity(6, 6) * lambda;
        pen[(0, 0)] = 0.0;
        let mut theta = vec![fit.intercept];
        theta.extend(&fit.weights);
        let theta = DVector::from_vec(theta);
        let lhs = (a.transpose() * &w * &a + pen) * theta;
        let rhs = a.transpose() * &w * y;
        assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn constant_targets_give_zero_weights() {
        let p = random_set(200, 3, 3, |_| 0.42);
        let fit = fit_weighted_ridge(&p, None, 1.0).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((fit.intercept - 0.42).abs() < 1e-12);
    }

    #[test]
    fn top_k_selects_dominant_feature() {
        let p = random_set(300, 2, 4, |x| 1.0 * x[0] + 0.1 * x[1]);
        let fit = fit_weighted_ridge(&p, Some(1), 1e-3).unwrap();
        assert_eq!(fit.features, vec![0]);
        assert_eq!(fit.weights.len(), 1);
    }

    #[test]
    fn rank_deficient_without_penalty_is_singular() {
        let mut p = random_set(50, 3, 5, |x| x[0]);
        for i in 0..50 {
            let v = p.samples.get(i, 0);
            p.samples.set(i, 2, 2.0 * v);
        }
        assert!(matches!(fit_weighted_ridge(&p, None, 0.0), Err(Error::SingularSystem)));
        assert!(fit_weighted_ridge(&p, None, 0.1).is_ok());
    }

    #[test]
    fn top_k_ties_prefer_lower_index() {
        assert_eq!(top_k(&[1.0, -3.0, 3.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_k(&[2.0, 2.0, 2.0], 1), vec![0]);
    }
}
