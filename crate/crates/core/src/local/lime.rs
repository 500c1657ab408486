use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ridge::fit_with_weights;
use super::{perturb, LimeConfig, LinearFit, LocalExplanation, LocalMethod, PerturbationSet};
use crate::blackbox::Blackbox;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::fidelity::{group_fidelities, threshold, FidelityMetric, FidelityPairs};

pub const JTT_LAMBDA_GRID: [f64; 6] = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

fn check_input(model: &dyn Blackbox, x_star: &[f64], cfg: &LimeConfig) -> Result<()> {
    if x_star.len() != model.n_features() {
        return Err(Error::SchemaMismatch {
            expected: model.n_features(),
            actual: x_star.len(),
        });
    }
    cfg.validate(x_star.len())
}

fn labeled_perturbations(model: &dyn Blackbox, x_star: &[f64], cfg: &LimeConfig) -> Result<PerturbationSet> {
    let mut pert = perturb(x_star, cfg)?;
    pert.label(model);
    Ok(pert)
}

/// LIME: weighted ridge on blackbox probabilities over Gaussian
/// perturbations of `x_star`.
pub fn explain_lime(model: &dyn Blackbox, x_star: &[f64], cfg: &LimeConfig) -> Result<LocalExplanation> {
    check_input(model, x_star, cfg)?;
    let pert = labeled_perturbations(model, x_star, cfg)?;
    let fit = fit_with_weights(&pert, &pert.weights, cfg.k, cfg.ridge_lambda)?;
    Ok(LocalExplanation::from_fit(
        LocalMethod::Lime,
        fit,
        x_star,
        model.predict_proba(x_star),
        cfg.clip_outputs,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JttConfig {
    pub lambda_up: f64,
}

impl JttConfig {
    pub fn new(lambda_up: f64) -> Result<Self> {
        if !(lambda_up >= 1.0) || !lambda_up.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda_up must be >= 1, got {lambda_up}")));
        }
        Ok(Self { lambda_up })
    }
}

/// Both stages of a JTT fit on one perturbation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JttStages {
    pub perturbations: PerturbationSet,
    pub stage1: LinearFit,
    pub stage2: LinearFit,
    /// Perturbations where the thresholded stage-1 output disagrees with the
    /// thresholded blackbox output.
    pub error_set: Vec<usize>,
}

impl JttStages {
    /// Thresholded agreement with the blackbox on the stage-1 error set.
    pub fn error_set_accuracy(&self, fit: &LinearFit) -> Option<f64> {
        if self.error_set.is_empty() {
            return None;
        }
        let p = &self.perturbations;
        let hits = self
            .error_set
            .iter()
            .filter(|&&j| threshold(fit.predict(p.samples.row(j))) == threshold(p.targets[j]))
            .count();
        Some(hits as f64 / self.error_set.len() as f64)
    }
}

fn error_set(pert: &PerturbationSet, fit: &LinearFit) -> Vec<usize> {
    (0..pert.len())
        .filter(|&j| threshold(fit.predict(pert.samples.row(j))) != threshold(pert.targets[j]))
        .collect()
}

fn upweighted(pert: &PerturbationSet, errors: &[usize], lambda_up: f64) -> Vec<f64> {
    let mut w = pert.weights.clone();
    for &j in errors {
        w[j] *= lambda_up;
    }
    w
}

pub fn jtt_stages(model: &dyn Blackbox, x_star: &[f64], cfg: &LimeConfig, jtt: &JttConfig) -> Result<JttStages> {
    check_input(model, x_star, cfg)?;
    let pert = labeled_perturbations(model, x_star, cfg)?;
    let stage1 = fit_with_weights(&pert, &pert.weights, cfg.k, cfg.ridge_lambda)?;
    let errors = error_set(&pert, &stage1);
    let w = upweighted(&pert, &errors, jtt.lambda_up);
    let stage2 = fit_with_weights(&pert, &w, cfg.k, cfg.ridge_lambda)?;
    Ok(JttStages {
        perturbations: pert,
        stage1,
        stage2,
        error_set: errors,
    })
}

/// Two-stage LIME: the stage-1 fit flags perturbations it misclassifies,
/// their proximity weights are multiplied by `lambda_up`, and the full fit
/// (including feature selection) is rerun.
pub fn explain_lime_jtt(
    model: &dyn Blackbox,
    x_star: &[f64],
    cfg: &LimeConfig,
    jtt: &JttConfig,
) -> Result<LocalExplanation> {
    let stages = jtt_stages(model, x_star, cfg, jtt)?;
    Ok(LocalExplanation::from_fit(
        LocalMethod::LimeJtt,
        stages.stage2,
        x_star,
        model.predict_proba(x_star),
        cfg.clip_outputs,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda_up: f64,
    pub grid: Vec<f64>,
    /// Worst-group validation fidelity per grid value (for mean error, the
    /// negated largest absolute group mean error); `None` when undefined.
    pub worst_group: Vec<Option<f64>>,
}

fn worst_group_score(pairs: &FidelityPairs, n_groups: usize, metric: FidelityMetric) -> Option<f64> {
    let per = group_fidelities(pairs, n_groups, metric);
    let vals: Vec<f64> = per.into_iter().flatten().collect();
    if vals.is_empty() {
        return None;
    }
    Some(match metric {
        FidelityMetric::MeanError => -vals.iter().map(|v| v.abs()).fold(0.0, f64::max),
        _ => vals.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Chooses `lambda_up` from `grid` to maximize the worst-group fidelity of
/// JTT-LIME explanations on validation rows; ties go to the earlier value.
/// Query `i` uses `cfg.for_point(i)`.
pub fn select_lambda_up(
    model: &dyn Blackbox,
    valid_x: &Matrix,
    valid_groups: &[usize],
    n_groups: usize,
    cfg: &LimeConfig,
    grid: &[f64],
    metric: FidelityMetric,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda_up grid".into()));
    }
    for &l in grid {
        JttConfig::new(l)?;
    }
    // Perturbations and the stage-1 fit do not depend on lambda_up, so
    // every grid value reuses them.
    let per_point: Vec<Result<(f64, Vec<f64>)>> = (0..valid_x.nrows())
        .into_par_iter()
        .map(|i| {
            let x = valid_x.row(i);
            let c = cfg.for_point(i);
            check_input(model, x, &c)?;
            let pert = labeled_perturbations(model, x, &c)?;
            let stage1 = fit_with_weights(&pert, &pert.weights, c.k, c.ridge_lambda)?;
            let errors = error_set(&pert, &stage1);
            let mut outs = Vec::with_capacity(grid.len());
            for &l in grid {
                let w = upweighted(&pert, &errors, l);
                let fit = fit_with_weights(&pert, &w, c.k, c.ridge_lambda)?;
                let mut e = fit.predict(x);
                if c.clip_outputs {
                    e = e.clamp(0.0, 1.0);
                }
                outs.push(e);
            }
            Ok((model.predict_proba(x), outs))
        })
        .collect();
    let mut bb = Vec::with_capacity(per_point.len());
    let mut expl: Vec<Vec<f64>> = vec![Vec::with_capacity(per_point.len()); grid.len()];
    for r in per_point {
        let (b, outs) = r?;
        bb.push(b);
        for (g, e) in outs.into_iter().enumerate() {
            expl[g].push(e);
        }
    }
    let mut worst_group = Vec::with_capacity(grid.len());
    for e in expl {
        let pairs = FidelityPairs::new(bb.clone(), e, valid_groups.to_vec())?;
        worst_group.push(worst_group_score(&pairs, n_groups, metric));
    }
    let mut best = 0;
    for (i, s) in worst_group.iter().enumerate() {
        if s.unwrap_or(f64::NEG_INFINITY) > worst_group[best].unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
    }
    Ok(LambdaSelection {
        lambda_up: grid[best],
        grid: grid.to_vec(),
        worst_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnBlackbox;
    use crate::linalg::sigmoid;

    fn small_cfg(seed: u64) -> LimeConfig {
        LimeConfig {
            n_perturbations: 1500,
            seed,
            ..LimeConfig::default()
        }
    }

    #[test]
    fn constant_blackbox_gives_zero_weights() {
        let bb = FnBlackbox::new(3, |_: &[f64]| 0.3);
        let e = explain_lime(&bb, &[0.1, 0.2, 0.3], &small_cfg(1)).unwrap();
        assert!(e.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((e.explanation_output - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dominant_feature_is_selected() {
        let bb = FnBlackbox::new(2, |x: &[f64]| 0.5 + 0.1 * x[0] + 0.01 * x[1]);
        let cfg = LimeConfig {
            k: Some(1),
            ..small_cfg(2)
        };
        let e = explain_lime(&bb, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(e.features, vec![0]);
    }

    #[test]
    fn linear_blackbox_coefficients_recovered() {
        let coef = [0.4, -0.25, 0.05];
        let bb = FnBlackbox::new(3, move |x: &[f64]| 0.5 + x.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>());
        let cfg = LimeConfig {
            ridge_lambda: 1e-7,
            ..small_cfg(3)
        };
        let e = explain_lime(&bb, &[1.0, -0.5, 2.0], &cfg).unwrap();
        for (w, c) in e.weights.iter().zip(coef) {
            assert!((w - c).abs() < 1e-4, "{w} vs {c}");
        }
    }

    #[test]
    fn bitwise_reproducible() {
        let bb = FnBlackbox::new(2, |x: &[f64]| sigmoid(x[0] * x[1]));
        let a = explain_lime(&bb, &[0.3, 0.9], &small_cfg(7)).unwrap();
        let b = explain_lime(&bb, &[0.3, 0.9], &small_cfg(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_lambda_matches_vanilla_bitwise() {
        let bb = FnBlackbox::new(3, |x: &[f64]| sigmoid(3.0 * (x[0] * x[1]).sin() - x[2]));
        let cfg = LimeConfig {
            k: Some(2),
            ..small_cfg(11)
        };
        let x = [0.2, -0.4, 0.1];
        let v = explain_lime(&bb, &x, &cfg).unwrap();
        let j = explain_lime_jtt(&bb, &x, &cfg, &JttConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(v.intercept.to_bits(), j.intercept.to_bits());
        assert_eq!(v.features, j.features);
        assert_eq!(v.explanation_output.to_bits(), j.explanation_output.to_bits());
        for (a, b) in v.weights.iter().zip(&j.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_error_set_matches_vanilla() {
        // a linear blackbox far from the 0.5 boundary is never misclassified
        let bb = FnBlackbox::new(2, |x: &[f64]| 0.9 + 0.001 * x[0]);
        let cfg = small_cfg(5);
        let st = jtt_stages(&bb, &[0.0, 0.0], &cfg, &JttConfig::new(50.0).unwrap()).unwrap();
        assert!(st.error_set.is_empty());
        assert_eq!(st.stage1, st.stage2);
        let v = explain_lime(&bb, &[0.0, 0.0], &cfg).unwrap();
        let j = explain_lime_jtt(&bb, &[0.0, 0.0], &cfg, &JttConfig::new(50.0).unwrap()).unwrap();
        assert_eq!(v.weights, j.weights);
    }

    #[test]
    fn upweighting_improves_accuracy_on_error_set() {
        // circular boundary: no linear fit classifies every perturbation
        let bb = FnBlackbox::new(2, |x: &[f64]| sigmoid(4.0 * (x[0] * x[0] + x[1] * x[1] - 1.0)));
        let st = jtt_stages(&bb, &[0.8, 0.3], &small_cfg(13), &JttConfig::new(20.0).unwrap()).unwrap();
        assert!(!st.error_set.is_empty());
        let before = st.error_set_accuracy(&st.stage1).unwrap();
        let after = st.error_set_accuracy(&st.stage2).unwrap();
        assert_eq!(before, 0.0);
        assert!(after > before);
    }

    #[test]
    fn lambda_below_one_rejected() {
        assert!(JttConfig::new(0.5).is_err());
    }

    #[test]
    fn selection_picks_a_grid_value() {
        let bb = FnBlackbox::new(2, |x: &[f64]| sigmoid(4.0 * (x[0] * x[0] - x[1])));
        let x = Matrix::from_rows(&[vec![0.1, 0.0], vec![1.0, 0.5], vec![-0.5, 0.3], vec![0.0, -1.0]]).unwrap();
        let cfg = LimeConfig {
            n_perturbations: 400,
            ..LimeConfig::default()
        };
        let sel = select_lambda_up(&bb, &x, &[0, 0, 1, 1], 2, &cfg, &JTT_LAMBDA_GRID, FidelityMetric::Accuracy).unwrap();
        assert!(JTT_LAMBDA_GRID.contains(&sel.lambda_up));
        assert_eq!(sel.worst_group.len(), 6);
    }
}
