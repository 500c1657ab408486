//! Per-query surrogate explanations: LIME, its JTT-reweighted variant, and
//! kernel SHAP.

pub mod lime;
pub mod perturb;
pub mod ridge;
pub mod shap;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use lime::{
    explain_lime, explain_lime_jtt, jtt_stages, select_lambda_up, JttConfig, JttStages, LambdaSelection,
    JTT_LAMBDA_GRID,
};
pub use perturb::{default_kernel_width, perturb, PerturbationSet, ProximityKernel};
pub use ridge::{fit_weighted_ridge, top_k, weighted_ridge, LinearFit};
pub use shap::{explain_kernel_shap, shapley_values, ShapConfig, ShapFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMethod {
    Lime,
    LimeJtt,
    KernelShap,
}

impl LocalMethod {
    pub fn name(self) -> &'static str {
        match self {
            LocalMethod::Lime => "lime",
            LocalMethod::LimeJtt => "lime_jtt",
            LocalMethod::KernelShap => "kernel_shap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_perturbations: usize,
    pub sigma: f64,
    /// Feature budget; `None` keeps every encoded feature.
    pub k: Option<usize>,
    pub ridge_lambda: f64,
    /// Proximity kernel width; `None` means `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    pub kernel: ProximityKernel,
    pub clip_outputs: bool,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_perturbations: 5000,
            sigma: 1.0,
            k: None,
            ridge_lambda: 1.0,
            kernel_width: None,
            kernel: ProximityKernel::Exponential,
            clip_outputs: false,
            seed: 0,
        }
    }
}

impl LimeConfig {
    /// Copy whose seed is mixed with the query's index, so explanations do
    /// not depend on evaluation order.
    pub fn for_point(&self, index: usize) -> Self {
        Self {
            seed: rng::derive_seed(self.seed, index as u64),
            ..self.clone()
        }
    }

    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        if self.ridge_lambda == 0.0 && self.n_perturbations < d + 1 {
            return Err(Error::InvalidArgument(format!(
                "unpenalized fit on {d} features needs at least {} perturbations",
                d + 1
            )));
        }
        if self.n_perturbations == 0 {
            return Err(Error::InvalidArgument("n_perturbations must be positive".into()));
        }
        if let Some(k) = self.k {
            if k == 0 || k > d {
                return Err(Error::InvalidArgument(format!("feature budget {k} not in 1..={d}")));
            }
        }
        Ok(())
    }
}

/// A linear surrogate around one query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub method: LocalMethod,
    pub intercept: f64,
    /// Selected encoded feature ids, ascending.
    pub features: Vec<usize>,
    pub weights: Vec<f64>,
    /// Surrogate output at the query.
    pub explanation_output: f64,
    /// Blackbox output at the query.
    pub blackbox_output: f64,
}

impl LocalExplanation {
    pub(crate) fn from_fit(method: LocalMethod, fit: LinearFit, x_star: &[f64], blackbox_output: f64, clip: bool) -> Self {
        let mut e = fit.predict(x_star);
        if clip {
            e = e.clamp(0.0, 1.0);
        }
        Self {
            method,
            intercept: fit.intercept,
            features: fit.features,
            weights: fit.weights,
            explanation_output: e,
            blackbox_output,
        }
    }

    pub fn record(&self, point: usize, group: usize) -> ExplanationRecord {
        ExplanationRecord {
            point,
            group,
            method: self.method,
            intercept: self.intercept,
            weights: self.features.iter().copied().zip(self.weights.iter().copied()).collect(),
            explanation_output: self.explanation_output,
            blackbox_output: self.blackbox_output,
        }
    }
}

/// One line of an explanation dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub point: usize,
    pub group: usize,
    pub method: LocalMethod,
    pub intercept: f64,
    pub weights: Vec<(usize, f64)>,
    pub explanation_output: f64,
    pub blackbox_output: f64,
}

/// Writes one JSON object per line.
pub fn write_explanations<W: Write>(out: &mut W, records: &[ExplanationRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<explanation dump>", e))?;
    }
    Ok(())
}

pub fn read_explanations(text: &str) -> Result<Vec<ExplanationRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
