use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ridge::top_k;
use super::{LocalExplanation, LocalMethod};
use crate::blackbox::Blackbox;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    /// Coalitions drawn when enumeration is too large.
    pub n_coalitions: usize,
    /// Enumerate all coalitions when there are at most this many players.
    pub max_exhaustive: usize,
    /// Feature budget; `None` uses every encoded feature as a player.
    pub k: Option<usize>,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            n_coalitions: 2048,
            max_exhaustive: 12,
            k: None,
            seed: 0,
        }
    }
}

impl ShapConfig {
    pub fn for_point(&self, index: usize) -> Self {
        Self {
            seed: rng::derive_seed(self.seed, index as u64),
            ..self.clone()
        }
    }
}

/// Shapley attributions for a set of players; non-players stay at their
/// background values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapFit {
    /// Mean blackbox output over the background.
    pub base_value: f64,
    pub players: Vec<usize>,
    pub phi: Vec<f64>,
    /// Value of the coalition of all players (`B(x*)` when every feature
    /// is a player).
    pub full_value: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn kernel_weight(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64)
}

/// Mean blackbox output over background rows with the coalition's players
/// set to the query's values.
fn coalition_value(model: &dyn Blackbox, x_star: &[f64], background: &Matrix, players: &[usize], on: &[bool]) -> f64 {
    let mut masked = background.clone();
    for i in 0..masked.nrows() {
        let row = masked.row_mut(i);
        for (&p, &o) in players.iter().zip(on) {
            if o {
                row[p] = x_star[p];
            }
        }
    }
    let preds = model.predict_batch(&masked);
    preds.iter().sum::<f64>() / preds.len() as f64
}

fn coalitions(m: usize, cfg: &ShapConfig) -> Result<(Vec<Vec<bool>>, Vec<f64>)> {
    if m <= cfg.max_exhaustive {
        let mut zs = Vec::new();
        let mut ws = Vec::new();
        for mask in 1u64..(1u64 << m) - 1 {
            let z: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
            let s = z.iter().filter(|&&b| b).count();
            ws.push(kernel_weight(m, s));
            zs.push(z);
        }
        return Ok((zs, ws));
    }
    if cfg.n_coalitions == 0 {
        return Err(Error::DegenerateCoalitionSet);
    }
    // Sizes drawn in proportion to their total kernel mass, members uniform
    // within a size; the kernel is then carried by the sampling itself.
    let mass: Vec<f64> = (1..m).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
    let total: f64 = mass.iter().sum();
    let mut r = rng::seeded(cfg.seed);
    let mut zs = Vec::with_capacity(cfg.n_coalitions);
    for _ in 0..cfg.n_coalitions {
        let mut u = r.random::<f64>() * total;
        let mut s = m - 1;
        for (i, &p) in mass.iter().enumerate() {
            if u < p {
                s = i + 1;
                break;
            }
            u -= p;
        }
        let mut z = vec![false; m];
        for i in index::sample(&mut r, m, s) {
            z[i] = true;
        }
        zs.push(z);
    }
    let ws = vec![1.0; zs.len()];
    Ok((zs, ws))
}

/// Kernel SHAP over `players`: weighted least squares of coalition values
/// on coalition indicators, with the attributions constrained to sum to
/// `v(all players) - v(empty)`. The constraint is imposed by eliminating
/// the last player's attribution.
pub fn shapley_values(
    model: &dyn Blackbox,
    x_star: &[f64],
    background: &Matrix,
    players: &[usize],
    cfg: &ShapConfig,
) -> Result<ShapFit> {
    if background.nrows() == 0 {
        return Err(Error::InvalidArgument("kernel SHAP needs a nonempty background".into()));
    }
    if background.ncols() != x_star.len() || x_star.len() != model.n_features() {
        return Err(Error::SchemaMismatch {
            expected: model.n_features(),
            actual: x_star.len(),
        });
    }
    let m = players.len();
    if m == 0 {
        return Err(Error::InvalidArgument("kernel SHAP needs at least one player".into()));
    }
    let base_value = coalition_value(model, x_star, background, players, &vec![false; m]);
    let full_value = coalition_value(model, x_star, background, players, &vec![true; m]);
    let total = full_value - base_value;
    if m == 1 {
        return Ok(ShapFit {
            base_value,
            players: players.to_vec(),
            phi: vec![total],
            full_value,
        });
    }
    let (zs, ws) = coalitions(m, cfg)?;
    let q = m - 1;
    let mut gram = vec![0.0; q * q];
    let mut rhs = vec![0.0; q];
    let mut a = vec![0.0; q];
    for (z, &w) in zs.iter().zip(&ws) {
        let v = coalition_value(model, x_star, background, players, z);
        let last = f64::from(u8::from(z[q]));
        for i in 0..q {
            a[i] = f64::from(u8::from(z[i])) - last;
        }
        let t = v - base_value - last * total;
        for i in 0..q {
            rhs[i] += w * a[i] * t;
            for j in i..q {
                gram[i * q + j] += w * a[i] * a[j];
            }
        }
    }
    for i in 0..q {
        for j in 0..i {
            gram[i * q + j] = gram[j * q + i];
        }
    }
    let mut phi = cholesky_solve(&gram, &rhs, q)?;
    let last = total - phi.iter().sum::<f64>();
    phi.push(last);
    Ok(ShapFit {
        base_value,
        players: players.to_vec(),
        phi,
        full_value,
    })
}

/// Kernel SHAP explanation of `x_star`. With a feature budget `k`, a full
/// fit ranks features by `|phi|` and the top `k` are refit as the only
/// players, the rest held at background values; the surrogate output is
/// then the value of that restricted coalition.
pub fn explain_kernel_shap(
    model: &dyn Blackbox,
    x_star: &[f64],
    background: &Matrix,
    cfg: &ShapConfig,
) -> Result<LocalExplanation> {
    let d = x_star.len();
    let all: Vec<usize> = (0..d).collect();
    let mut fit = shapley_values(model, x_star, background, &all, cfg)?;
    if let Some(k) = cfg.k {
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("feature budget {k} not in 1..={d}")));
        }
        if k < d {
            let chosen = top_k(&fit.phi, k);
            fit = shapley_values(model, x_star, background, &chosen, cfg)?;
        }
    }
    let explanation_output = fit.base_value + fit.phi.iter().sum::<f64>();
    Ok(LocalExplanation {
        method: LocalMethod::KernelShap,
        intercept: fit.base_value,
        features: fit.players,
        weights: fit.phi,
        explanation_output,
        blackbox_output: model.predict_proba(x_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnBlackbox;
    use crate::linalg::sigmoid;
    use rand_distr::{Distribution, StandardNormal};

    /// Shapley values by the permutation-free subset formula over every
    /// coalition, using the same interventional value function.
    fn brute_force(model: &dyn Blackbox, x: &[f64], bg: &Matrix) -> Vec<f64> {
        let m = x.len();
        let players: Vec<usize> = (0..m).collect();
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let mut phi = vec![0.0; m];
        for mask in 0u64..(1 << m) {
            let on: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
            let s = on.iter().filter(|&&b| b).count();
            let v = coalition_value(model, x, bg, &players, &on);
            for i in 0..m {
                if on[i] {
                    continue;
                }
                let mut with = on.clone();
                with[i] = true;
                let vi = coalition_value(model, x, bg, &players, &with);
                phi[i] += fact(s) * fact(m - s - 1) / fact(m) * (vi - v);
            }
        }
        phi
    }

    fn background(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        let data = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn kernel_weights_known_values() {
        assert!((kernel_weight(5, 1) - 4.0 / (5.0 * 4.0)).abs() < 1e-15);
        assert!((kernel_weight(5, 2) - 4.0 / (10.0 * 6.0)).abs() < 1e-15);
    }

    #[test]
    fn linear_blackbox_matches_enumeration() {
        let coef = [0.3, -0.2, 0.5, 0.1, -0.4];
        let bb = FnBlackbox::new(5, move |x: &[f64]| x.iter().zip(coef).map(|(a, b)| a * b).sum());
        let bg = background(20, 5, 1);
        let x = [1.0, 2.0, -1.0, 0.5, 0.0];
        let e = explain_kernel_shap(&bb, &x, &bg, &ShapConfig::default()).unwrap();
        let oracle = brute_force(&bb, &x, &bg);
        for (a, b) in e.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
        // closed form for a linear model: coef * (x - background mean)
        for j in 0..5 {
            let m = bg.column(j).iter().sum::<f64>() / 20.0;
            assert!((e.weights[j] - coef[j] * (x[j] - m)).abs() < 1e-10);
        }
    }

    #[test]
    fn nonlinear_blackbox_matches_enumeration() {
        let bb = FnBlackbox::new(6, |x: &[f64]| sigmoid(x[0] * x[1] - x[2] + (x[3] * x[4]).sin() + 0.2 * x[5]));
        let bg = background(10, 6, 2);
        let x = [0.5, -1.0, 1.5, 0.2, 2.0, -0.7];
        let e = explain_kernel_shap(&bb, &x, &bg, &ShapConfig::default()).unwrap();
        let oracle = brute_force(&bb, &x, &bg);
        for (a, b) in e.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn local_accuracy_holds_with_sampling() {
        let bb = FnBlackbox::new(15, |x: &[f64]| sigmoid(x.iter().enumerate().map(|(i, v)| v * (i as f64 - 7.0) / 5.0).sum::<f64>().tanh() * 2.0));
        let bg = background(30, 15, 3);
        let x: Vec<f64> = (0..15).map(|i| (i as f64 / 3.0).cos()).collect();
        let e = explain_kernel_shap(&bb, &x, &bg, &ShapConfig { n_coalitions: 600, ..ShapConfig::default() }).unwrap();
        assert!((e.explanation_output - e.blackbox_output).abs() < 1e-8);
        assert_eq!(e.features.len(), 15);
    }

    #[test]
    fn query_equal_to_background_gives_zero() {
        let bb = FnBlackbox::new(3, |x: &[f64]| sigmoid(x[0] - x[1] * x[2]));
        let bg = Matrix::from_rows(&[vec![0.4, 1.0, -2.0]]).unwrap();
        let e = explain_kernel_shap(&bb, &[0.4, 1.0, -2.0], &bg, &ShapConfig::default()).unwrap();
        assert!(e.weights.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_player_takes_all_credit() {
        let bb = FnBlackbox::new(1, |x: &[f64]| sigmoid(x[0]));
        let bg = background(5, 1, 4);
        let e = explain_kernel_shap(&bb, &[1.0], &bg, &ShapConfig::default()).unwrap();
        assert!((e.explanation_output - sigmoid(1.0)).abs() < 1e-12);
    }

    #[test]
    fn subset_mode_keeps_local_accuracy_on_restricted_set() {
        let coef = [2.0, 0.1, -1.5, 0.05];
        let bb = FnBlackbox::new(4, move |x: &[f64]| x.iter().zip(coef).map(|(a, b)| a * b).sum());
        let bg = background(25, 4, 5);
        let x = [1.0, 1.0, 1.0, 1.0];
        let cfg = ShapConfig { k: Some(2), ..ShapConfig::default() };
        let e = explain_kernel_shap(&bb, &x, &bg, &cfg).unwrap();
        assert_eq!(e.features, vec![0, 2]);
        let mut on = [false; 4];
        on[0] = true;
        on[2] = true;
        let restricted = coalition_value(&bb, &x, &bg, &[0, 1, 2, 3], &on);
        assert!((e.explanation_output - restricted).abs() < 1e-10);
    }

    #[test]
    fn no_coalitions_is_degenerate() {
        let bb = FnBlackbox::new(14, |x: &[f64]| x[0]);
        let bg = background(3, 14, 6);
        let cfg = ShapConfig { n_coalitions: 0, ..ShapConfig::default() };
        assert!(matches!(
            explain_kernel_shap(&bb, &[0.0; 14], &bg, &cfg),
            Err(Error::DegenerateCoalitionSet)
        ));
    }
}
