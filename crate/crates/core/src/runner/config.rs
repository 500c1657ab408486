use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blackbox::{logistic_grid, mlp_grid, Family, MlpConfig, ModelConfig};
use crate::error::{Error, Result};
use crate::global::{AdditiveTarget, DEPTH_GRID};
use crate::local::{ProximityKernel, JTT_LAMBDA_GRID};
use crate::metrics::fidelity::FidelityMetric;
use crate::sim::SimParams;
use crate::synth::SYNTHETIC_NAMES;

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Display name; defaults to the csv stem or the generator name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Built-in generator, used instead of `csv` + `schema`.
    #[serde(default)]
    pub synthetic: Option<String>,
    #[serde(default = "default_synthetic_rows")]
    pub n: usize,
    #[serde(default)]
    pub synthetic_seed: u64,
    /// Oversample the minority class in the blackbox training split.
    #[serde(default)]
    pub balance_classes: bool,
    /// Drop encoded features whose mutual information with the group
    /// exceeds this many nats (computed on the blackbox training split).
    #[serde(default)]
    pub mi_filter: Option<f64>,
}

fn default_synthetic_rows() -> usize {
    4000
}

impl DatasetSpec {
    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        if let Some(s) = &self.synthetic {
            return s.clone();
        }
        self.csv
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackboxSpec {
    pub family: Family,
    /// Grid search with k-fold CV; otherwise the first grid entry is used.
    #[serde(default = "yes")]
    pub tune: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Logistic L2 strengths; defaults to 25 values evenly spaced on [1e-5, 1].
    #[serde(default)]
    pub l2: Option<Vec<f64>>,
    /// MLP hidden widths; defaults to 50, 100, 200.
    #[serde(default)]
    pub hidden_units: Option<Vec<usize>>,
    /// Overrides for every MLP grid entry.
    #[serde(default)]
    pub mlp: Option<MlpConfig>,
}

fn yes() -> bool {
    true
}

fn default_folds() -> usize {
    5
}

impl BlackboxSpec {
    pub fn grid(&self) -> Vec<ModelConfig> {
        match self.family {
            Family::Logistic => match &self.l2 {
                Some(v) => v.iter().map(|&l2| ModelConfig::Logistic { l2 }).collect(),
                None => logistic_grid(),
            },
            Family::Mlp => {
                let base = self.mlp.clone().unwrap_or_default();
                match &self.hidden_units {
                    Some(h) => h
                        .iter()
                        .map(|&hidden_units| {
                            ModelConfig::Mlp(MlpConfig {
                                hidden_units,
                                ..base.clone()
                            })
                        })
                        .collect(),
                    None if self.mlp.is_some() => mlp_grid()
                        .into_iter()
                        .map(|c| match c {
                            ModelConfig::Mlp(m) => ModelConfig::Mlp(MlpConfig {
                                hidden_units: m.hidden_units,
                                ..base.clone()
                            }),
                            other => other,
                        })
                        .collect(),
                    None => mlp_grid(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    Lime,
    LimeJtt,
    KernelShap,
    Tree,
    Additive,
}

impl ExplainerKind {
    pub fn name(self) -> &'static str {
        match self {
            ExplainerKind::Lime => "lime",
            ExplainerKind::LimeJtt => "lime_jtt",
            ExplainerKind::KernelShap => "kernel_shap",
            ExplainerKind::Tree => "tree",
            ExplainerKind::Additive => "additive",
        }
    }

    pub fn is_local(self) -> bool {
        matches!(self, ExplainerKind::Lime | ExplainerKind::LimeJtt | ExplainerKind::KernelShap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerSpec {
    pub kind: ExplainerKind,
    /// Label in reports; defaults to the kind, suffixed when repeated.
    #[serde(default)]
    pub name: Option<String>,
    /// Feature budget (lime, lime_jtt, kernel_shap).
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub n_perturbations: Option<usize>,
    #[serde(default)]
    pub ridge_lambda: Option<f64>,
    #[serde(default)]
    pub kernel_width: Option<f64>,
    #[serde(default)]
    pub kernel: Option<ProximityKernel>,
    #[serde(default)]
    pub clip_outputs: bool,
    /// Fixed JTT upweighting; otherwise chosen on validation from `lambda_grid`.
    #[serde(default)]
    pub lambda_up: Option<f64>,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    /// Fidelity metric maximized (worst group) when choosing `lambda_up`.
    #[serde(default)]
    pub selection_metric: Option<FidelityMetric>,
    #[serde(default)]
    pub n_coalitions: Option<usize>,
    #[serde(default)]
    pub background_size: Option<usize>,
    /// Fixed tree depth; otherwise tuned on validation over `depth_grid`.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub depth_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub min_leaf: Option<usize>,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub additive_target: Option<AdditiveTarget>,
    /// Group-balanced oversampling of the explainer training split
    /// (tree, additive) or SHAP background.
    #[serde(default)]
    pub balanced: bool,
}

impl ExplainerSpec {
    pub fn new(kind: ExplainerKind) -> Self {
        Self {
            kind,
            name: None,
            k: None,
            sigma: None,
            n_perturbations: None,
            ridge_lambda: None,
            kernel_width: None,
            kernel: None,
            clip_outputs: false,
            lambda_up: None,
            lambda_grid: None,
            selection_metric: None,
            n_coalitions: None,
            background_size: None,
            max_depth: None,
            depth_grid: None,
            min_leaf: None,
            bins: None,
            additive_target: None,
            balanced: false,
        }
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(|| JTT_LAMBDA_GRID.to_vec())
    }

    pub fn depth_grid(&self) -> Vec<usize> {
        self.depth_grid.clone().unwrap_or_else(|| DEPTH_GRID.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Also report which features a mutual-information filter would keep.
    #[serde(default)]
    pub mi_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationSource {
    Parametric,
    DatasetDriven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_sim_source")]
    pub mode: SimulationSource,
    #[serde(default = "default_group_accuracy")]
    pub group_accuracy: [f64; 2],
    #[serde(default = "default_sim_rows")]
    pub n_per_group: usize,
    #[serde(default = "default_prevalence")]
    pub prevalence: f64,
    #[serde(default = "default_mean_fidelity")]
    pub mean_fidelity: f64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub advantaged_group: usize,
    #[serde(default)]
    pub params: SimParams,
}

fn default_sim_source() -> SimulationSource {
    SimulationSource::Parametric
}
fn default_group_accuracy() -> [f64; 2] {
    [0.85, 0.85]
}
fn default_sim_rows() -> usize {
    10_000
}
fn default_prevalence() -> f64 {
    0.5
}
fn default_mean_fidelity() -> f64 {
    0.85
}
fn default_deltas() -> Vec<f64> {
    vec![0.0, 0.05, 0.10, 0.15]
}
fn default_runs() -> usize {
    20
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            mode: default_sim_source(),
            group_accuracy: default_group_accuracy(),
            n_per_group: default_sim_rows(),
            prevalence: default_prevalence(),
            mean_fidelity: default_mean_fidelity(),
            deltas: default_deltas(),
            runs: default_runs(),
            advantaged_group: 0,
            params: SimParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    K,
    Sigma,
    MaxDepth,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "sigma" => Ok(SweepParam::Sigma),
            "max_depth" => Ok(SweepParam::MaxDepth),
            other => Err(invalid(format!("unknown sweep parameter `{other}` (k, sigma, max_depth)"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Sigma => "sigma",
            SweepParam::MaxDepth => "max_depth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetSpec,
    pub blackbox: BlackboxSpec,
    #[serde(default)]
    pub explainers: Vec<ExplainerSpec>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<FidelityMetric>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Explain at most this many test rows per seed.
    #[serde(default)]
    pub max_test_points: Option<usize>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write per-query explanation dumps and surrogate dumps.
    #[serde(default)]
    pub dump_explanations: bool,
}

fn default_metrics() -> Vec<FidelityMetric> {
    FidelityMetric::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

impl ExperimentConfig {
    /// Parses TOML, resolves relative paths against `base_dir`, validates.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.dataset.csv);
        fix(&mut self.dataset.schema);
        fix(&mut self.output_dir);
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.dataset.display_name())
    }

    /// Report label per explainer, unique within the config.
    pub fn explainer_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.explainers
            .iter()
            .map(|e| {
                let base = e.name.clone().unwrap_or_else(|| e.kind.name().to_string());
                let mut name = base.clone();
                let mut i = 2;
                while !seen.insert(name.clone()) {
                    name = format!("{base}_{i}");
                    i += 1;
                }
                name
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.synthetic, &d.csv, &d.schema) {
            (Some(name), None, None) => {
                if !SYNTHETIC_NAMES.contains(&name.as_str()) {
                    return Err(invalid(format!(
                        "unknown synthetic dataset `{name}` (one of {})",
                        SYNTHETIC_NAMES.join(", ")
                    )));
                }
                if d.n < 10 {
                    return Err(invalid("synthetic dataset needs at least 10 rows"));
                }
            }
            (None, Some(csv), Some(schema)) => {
                for p in [csv, schema] {
                    if !p.is_file() {
                        return Err(invalid(format!("file not found: {}", p.display())));
                    }
                }
            }
            _ => return Err(invalid("dataset needs either `synthetic` or both `csv` and `schema`")),
        }
        if let Some(t) = d.mi_filter {
            if !(t >= 0.0) {
                return Err(invalid("mi_filter must be nonnegative"));
            }
        }
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        if self.metrics.is_empty() {
            return Err(invalid("at least one metric is required"));
        }
        let bb = &self.blackbox;
        if bb.grid().is_empty() {
            return Err(invalid("blackbox grid is empty"));
        }
        if bb.tune && bb.grid().len() > 1 && bb.folds < 2 {
            return Err(invalid("tuning needs at least 2 folds"));
        }
        if bb.l2.as_ref().is_some_and(|v| v.iter().any(|&x| !(x >= 0.0))) {
            return Err(invalid("l2 strengths must be nonnegative"));
        }
        if bb.hidden_units.as_ref().is_some_and(|v| v.contains(&0)) {
            return Err(invalid("hidden_units must be positive"));
        }
        if self.max_test_points == Some(0) {
            return Err(invalid("max_test_points must be positive"));
        }
        for e in &self.explainers {
            let who = e.kind.name();
            if e.k == Some(0) {
                return Err(invalid(format!("{who}: k must be at least 1")));
            }
            if e.sigma.is_some_and(|s| !(s >= 0.0)) {
                return Err(invalid(format!("{who}: sigma must be nonnegative")));
            }
            if e.ridge_lambda.is_some_and(|s| !(s >= 0.0)) {
                return Err(invalid(format!("{who}: ridge_lambda must be nonnegative")));
            }
            if e.lambda_up.is_some_and(|l| !(l >= 1.0)) {
                return Err(invalid(format!("{who}: lambda_up must be >= 1")));
            }
            if e.lambda_grid.as_ref().is_some_and(|g| g.is_empty() || g.iter().any(|&l| !(l >= 1.0))) {
                return Err(invalid(format!("{who}: lambda_grid needs values >= 1")));
            }
            if e.depth_grid.as_ref().is_some_and(|g| g.is_empty()) {
                return Err(invalid(format!("{who}: depth_grid is empty")));
            }
            if e.bins.is_some_and(|b| b < 2) {
                return Err(invalid(format!("{who}: bins must be at least 2")));
            }
            if e.balanced && matches!(e.kind, ExplainerKind::Lime | ExplainerKind::LimeJtt) {
                return Err(invalid(format!(
                    "{who}: `balanced` applies to tree, additive and kernel_shap (LIME has no training split)"
                )));
            }
        }
        if let Some(p) = &self.probe {
            if p.folds < 2 {
                return Err(invalid("probe needs at least 2 folds"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid("sweep values are empty"));
            }
        }
        if let Some(s) = &self.simulation {
            if s.runs == 0 || s.deltas.is_empty() {
                return Err(invalid("simulation needs runs and deltas"));
            }
            s.params.validate().map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dataset]
        synthetic = "two_region"
        n = 400

        [blackbox]
        family = "logistic"

        [[explainers]]
        kind = "lime"
        k = 2

        [[explainers]]
        kind = "lime"
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.metrics.len(), 3);
        assert_eq!(c.blackbox.grid().len(), 25);
        assert_eq!(c.explainer_names(), vec!["lime", "lime_2"]);
    }

    #[test]
    fn missing_dataset_file_is_config_invalid() {
        let text = r#"
            [dataset]
            csv = "nope.csv"
            schema = "nope.json"
            [blackbox]
            family = "mlp"
        "#;
        assert!(matches!(
            ExperimentConfig::from_toml_str(text, Path::new("/nonexistent")),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn duplicate_seeds_and_unknown_fields_rejected() {
        let dup = MINIMAL.replace("[dataset]", "seeds = [1, 1]\n[dataset]");
        assert!(matches!(ExperimentConfig::from_toml_str(&dup, Path::new(".")), Err(Error::ConfigInvalid(_))));
        let typo = MINIMAL.replace("n = 400", "n = 400\nrows = 3");
        assert!(matches!(ExperimentConfig::from_toml_str(&typo, Path::new(".")), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn balanced_lime_rejected() {
        let text = MINIMAL.replace("k = 2", "k = 2\nbalanced = true");
        assert!(ExperimentConfig::from_toml_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml().unwrap(), Path::new(".")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn mlp_overrides_apply_to_default_widths() {
        let text = r#"
            [dataset]
            synthetic = "xor"
            [blackbox]
            family = "mlp"
            [blackbox.mlp]
            epochs = 7
        "#;
        let c = ExperimentConfig::from_toml_str(text, Path::new(".")).unwrap();
        let grid = c.blackbox.grid();
        assert_eq!(grid.len(), 3);
        for g in grid {
            match g {
                ModelConfig::Mlp(m) => assert_eq!(m.epochs, 7),
                _ => panic!(),
            }
        }
    }
}
