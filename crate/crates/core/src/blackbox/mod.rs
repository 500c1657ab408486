//! Blackbox classifiers: logistic regression and a one-hidden-layer network.

pub mod eval;
pub mod logistic;
pub mod mlp;
pub mod tuning;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use eval::{eval_blackbox, GroupPerformance, PerformanceReport};
pub use logistic::{train_logistic, LogisticModel};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
pub use tuning::{grid_search, kfold_assignments, logistic_grid, mlp_grid, GridSearchResult};

/// Anything that maps an encoded feature vector to a probability in [0, 1].
pub trait Blackbox: Send + Sync {
    fn n_features(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> f64;

    fn predict_batch(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| self.predict_proba(r)).collect()
    }
}

/// Wraps a closure as a blackbox.
pub struct FnBlackbox<F> {
    n_features: usize,
    f: F,
}

impl<F> FnBlackbox<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F> Blackbox for FnBlackbox<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    Mlp,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Mlp => "mlp",
        }
    }
}

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    Logistic { l2: f64 },
    Mlp(MlpConfig),
}

impl ModelConfig {
    pub fn family(&self) -> Family {
        match self {
            ModelConfig::Logistic { .. } => Family::Logistic,
            ModelConfig::Mlp(_) => Family::Mlp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Predictor {
    Logistic(LogisticModel),
    Mlp(MlpModel),
}

impl Predictor {
    pub fn family(&self) -> Family {
        match self {
            Predictor::Logistic(_) => Family::Logistic,
            Predictor::Mlp(_) => Family::Mlp,
        }
    }

    pub fn info(&self) -> &TrainingInfo {
        match self {
            Predictor::Logistic(m) => &m.info,
            Predictor::Mlp(m) => &m.info,
        }
    }
}

impl Blackbox for Predictor {
    fn n_features(&self) -> usize {
        match self {
            Predictor::Logistic(m) => m.weights.len(),
            Predictor::Mlp(m) => m.n_features,
        }
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Logistic(m) => m.predict_proba(x),
            Predictor::Mlp(m) => m.predict_proba(x),
        }
    }
}

pub fn train(config: &ModelConfig, x: &Matrix, labels: &[u8], seed: u64) -> Result<Predictor> {
    match config {
        ModelConfig::Logistic { l2 } => Ok(Predictor::Logistic(train_logistic(x, labels, *l2)?)),
        ModelConfig::Mlp(cfg) => {
            let has_both = labels.contains(&0) && labels.contains(&1);
            if !has_both {
                return Err(Error::SingleClass);
            }
            Ok(Predictor::Mlp(train_mlp(x, labels, cfg, seed)?))
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile<P> {
    format_version: u32,
    model: P,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn model_to_json(model: &Predictor) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model,
    })?)
}

pub fn model_from_json(text: &str) -> Result<Predictor> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile<Predictor> = serde_json::from_str(text)?;
    Ok(file.model)
}

pub fn save_model(model: &Predictor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Predictor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 - 20.0) / 10.0, ((i * 7) % 5) as f64 / 5.0])
            .collect();
        let y = rows.iter().map(|r| u8::from(r[0] + 0.3 * r[1] > 0.1)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (x, y) = data();
        for cfg in [
            ModelConfig::Logistic { l2: 1e-2 },
            ModelConfig::Mlp(MlpConfig {
                hidden_units: 5,
                epochs: 5,
                ..MlpConfig::default()
            }),
        ] {
            let model = train(&cfg, &x, &y, 3).unwrap();
            let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
            for r in x.rows_iter() {
                assert_eq!(model.predict_proba(r).to_bits(), back.predict_proba(r).to_bits());
            }
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let (x, y) = data();
        let model = train(&ModelConfig::Logistic { l2: 1.0 }, &x, &y, 0).unwrap();
        let text = model_to_json(&model).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            model_from_json(&text),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn outputs_are_probabilities() {
        let (x, y) = data();
        let model = train(&ModelConfig::Mlp(MlpConfig { hidden_units: 4, epochs: 3, ..MlpConfig::default() }), &x, &y, 1).unwrap();
        for v in [-1e6, -3.0, 0.0, 3.0, 1e6] {
            let p = model.predict_proba(&[v, -v]);
            assert!((0.0..=1.0).contains(&p));
        }
    }
}
