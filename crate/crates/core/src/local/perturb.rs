use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LimeConfig;
use crate::blackbox::Blackbox;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// How perturbation samples are weighted by their distance to the query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityKernel {
    /// `exp(-d^2 / width^2)`: nearby samples dominate.
    #[default]
    Exponential,
    /// Weight equal to the Euclidean distance itself. Far samples dominate;
    /// a zero-distance sample gets the smallest positive weight.
    Distance,
}

/// Gaussian samples around a query, their proximity weights, and the
/// blackbox outputs on them (empty until [`PerturbationSet::label`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub samples: Matrix,
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
}

impl PerturbationSet {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn label(&mut self, model: &dyn Blackbox) {
        self.targets = model.predict_batch(&self.samples);
    }
}

pub fn default_kernel_width(d: usize) -> f64 {
    0.75 * (d as f64).sqrt()
}

/// Draws `z = x* + N(0, sigma^2 I)` in encoded space. Exponential weights
/// that would underflow are rescaled by a common factor (the largest
/// log-weight is shifted to zero) and floored at the smallest positive
/// double, so every weight stays positive and finite.
pub fn perturb(x_star: &[f64], cfg: &LimeConfig) -> Result<PerturbationSet> {
    if !(cfg.sigma >= 0.0) || !cfg.sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {}", cfg.sigma)));
    }
    let d = x_star.len();
    let n = cfg.n_perturbations;
    let width = cfg.kernel_width.unwrap_or_else(|| default_kernel_width(d));
    if !(width > 0.0) {
        return Err(Error::InvalidArgument("kernel width must be positive".into()));
    }
    let mut r = rng::seeded(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(n * d);
    let mut sq_dist = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = 0.0;
        for &x in x_star {
            let e = cfg.sigma * normal.sample(&mut r);
            data.push(x + e);
            s += e * e;
        }
        sq_dist.push(s);
    }
    let weights = match cfg.kernel {
        ProximityKernel::Exponential => {
            let logw: Vec<f64> = sq_dist.iter().map(|s| -s / (width * width)).collect();
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shift = if logw.iter().any(|&l| l.exp() < f64::MIN_POSITIVE) {
                max
            } else {
                0.0
            };
            logw.iter()
                .map(|l| (l - shift).exp().max(f64::MIN_POSITIVE))
                .collect()
        }
        ProximityKernel::Distance => sq_dist.iter().map(|s| s.sqrt().max(f64::MIN_POSITIVE)).collect(),
    };
    Ok(PerturbationSet {
        samples: Matrix::from_vec(n, d, data)?,
        weights,
        targets: Vec::new(),
    })
}
