use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExplainerKind, ExplainerSpec};
use crate::blackbox::{
    eval_blackbox, grid_search, Blackbox, Family, GridSearchResult, ModelConfig, PerformanceReport, Predictor,
    TrainingInfo,
};
use crate::dataset::{
    balanced_indices, encode, load_dataset, split, Dataset, EncodedDataset, FeatureSchema, SplitBundle,
};
use crate::error::{Error, Result};
use crate::global::{
    fit_additive_surrogate, fit_tree_surrogate, tune_tree_depth, AdditiveConfig, DepthSelection,
    GlobalSurrogate, DEFAULT_MIN_LEAF,
};
use crate::linalg::{mean, pearson, std_dev, Matrix};
use crate::local::{
    explain_kernel_shap, explain_lime, explain_lime_jtt, select_lambda_up, ExplanationRecord, JttConfig,
    LambdaSelection, LimeConfig, LocalExplanation, ShapConfig,
};
use crate::metrics::fidelity::{gap_report, FidelityMetric, FidelityPairs, GapReport};
use crate::metrics::{
    group_probe, mi_filter, preservation_check, preservation_check_one_vs_rest, wilcoxon_one_sided, MiFilterReport,
    PreservationCheck, ProbeReport,
};
use crate::rng::derive_seed;
use crate::synth;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

// Independent random streams derived from each run seed.
const STREAM_BALANCE: u64 = 1;
const STREAM_BLACKBOX: u64 = 2;
const STREAM_LOCAL: u64 = 3;
const STREAM_VALID: u64 = 4;
const STREAM_BACKGROUND: u64 = 5;
const STREAM_SURROGATE: u64 = 6;
const STREAM_PROBE: u64 = 7;

const DEFAULT_BACKGROUND: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the normalized configuration.
    pub config_hash: String,
    pub crate_version: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxSummary {
    pub config: ModelConfig,
    pub grid_index: usize,
    pub cv_auroc: Vec<Option<f64>>,
    pub training: TrainingInfo,
    /// Held-out performance on the test split.
    pub performance: PerformanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    /// Rows in blackbox train, explainer train, explainer validation, test.
    pub split_sizes: [usize; 4],
    pub n_features: usize,
    pub blackbox: Option<BlackboxSummary>,
    pub mi_filter: Option<MiFilterReport>,
    pub probe: Option<ProbeReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub predictor: Option<Predictor>,
}

/// Preservation identity evaluated for `group` against everyone else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPreservation {
    pub group: usize,
    pub check: PreservationCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub seed: u64,
    pub explainer: String,
    pub kind: ExplainerKind,
    pub n_points: usize,
    pub gaps: Vec<GapReport>,
    pub preservation: Vec<GroupPreservation>,
    pub lambda_selection: Option<LambdaSelection>,
    pub depth_selection: Option<DepthSelection>,
    pub error: Option<String>,
    #[serde(skip)]
    pub explanations: Vec<ExplanationRecord>,
    #[serde(skip)]
    pub surrogate: Option<GlobalSurrogate>,
}

impl CellReport {
    pub fn gap(&self, metric: FidelityMetric) -> Option<&GapReport> {
        self.gaps.iter().find(|g| g.metric == metric)
    }
}

/// Cross-seed aggregate for one explainer and metric. P-values are from a
/// one-sided signed-rank test that the gap exceeds zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub explainer: String,
    pub metric: FidelityMetric,
    pub n_seeds: usize,
    pub fidelity_mean: Option<f64>,
    pub fidelity_std: Option<f64>,
    pub max_gap_mean: Option<f64>,
    pub max_gap_std: Option<f64>,
    pub max_gap_p: Option<f64>,
    pub pairwise_gap_mean: Option<f64>,
    pub pairwise_gap_std: Option<f64>,
    pub pairwise_gap_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationSummary {
    pub n_checks: usize,
    /// Pearson correlation between the DP-gap change and the residual
    /// difference across checks; `None` with fewer than two checks or no
    /// variation.
    pub correlation: Option<f64>,
    pub mean_abs_diff: Option<f64>,
    pub max_abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub format_version: u32,
    pub provenance: Provenance,
    pub name: String,
    pub dataset: String,
    pub blackbox: Family,
    pub group_names: Vec<String>,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub cells: Vec<CellReport>,
    pub summary: Vec<SummaryRow>,
    pub preservation: PreservationSummary,
}

impl ReportBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: probe.format_version,
                expected: BUNDLE_FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn cells_for<'a>(&'a self, explainer: &'a str) -> impl Iterator<Item = &'a CellReport> + 'a {
        self.cells.iter().filter(move |c| c.explainer == explainer)
    }

    pub fn summary_for(&self, explainer: &str, metric: FidelityMetric) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.explainer == explainer && s.metric == metric)
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let text = cfg.to_toml()?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn load_experiment_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.dataset;
    match (&d.synthetic, &d.csv, &d.schema) {
        (Some(name), _, _) => synth::generate(name, d.n, d.synthetic_seed),
        (None, Some(csv), Some(schema)) => load_dataset(csv, &FeatureSchema::from_json_file(schema)?),
        _ => Err(Error::ConfigInvalid("dataset source missing".into())),
    }
}

/// Split, encoding and trained blackbox for one run seed.
pub struct PreparedRun {
    pub seed: u64,
    pub split: SplitBundle,
    pub encoded: EncodedDataset,
    pub mi_filter: Option<MiFilterReport>,
    pub search: GridSearchResult,
}

/// Splits, encodes (fit on the blackbox training rows), optionally filters
/// group-informative features, and trains the blackbox.
pub fn prepare_run(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<PreparedRun> {
    let sp = split(ds.n_rows(), seed)?;
    let mut enc = encode(ds, &sp.blackbox_train)?;
    let mut mi_report = None;
    if let Some(t) = cfg.dataset.mi_filter {
        let (_, rep) = mi_filter(&enc.select_rows(&sp.blackbox_train), t)?;
        enc = enc.select_features(&rep.kept);
        mi_report = Some(rep);
    }
    let mut rows = sp.blackbox_train.clone();
    if cfg.dataset.balance_classes {
        let strata: Vec<usize> = rows.iter().map(|&i| enc.labels[i] as usize).collect();
        let idx = balanced_indices(&strata, derive_seed(seed, STREAM_BALANCE), "class")?;
        rows = idx.into_iter().map(|i| rows[i]).collect();
    }
    let train = enc.select_rows(&rows);
    let grid = cfg.blackbox.grid();
    let grid = if cfg.blackbox.tune { &grid[..] } else { &grid[..1] };
    let search = grid_search(grid, &train.x, &train.labels, cfg.blackbox.folds, derive_seed(seed, STREAM_BLACKBOX))?;
    Ok(PreparedRun {
        seed,
        split: sp,
        encoded: enc,
        mi_filter: mi_report,
        search,
    })
}

struct SeedContext<'a> {
    seed: u64,
    enc: &'a EncodedDataset,
    split: &'a SplitBundle,
    model: &'a Predictor,
    n_groups: usize,
    points: Vec<usize>,
    test_x: Matrix,
    test_groups: Vec<usize>,
    blackbox_out: Vec<f64>,
    dump: bool,
}

/// Runs every seed (in parallel) and aggregates. Failures inside a seed or
/// an explainer are recorded in the bundle; only configuration and dataset
/// loading errors abort.
pub fn run_audit(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    if cfg.explainers.is_empty() {
        return Err(Error::ConfigInvalid("audit needs at least one explainer".into()));
    }
    let ds = load_experiment_dataset(cfg)?;
    let names = cfg.explainer_names();
    let per_seed: Vec<(SeedReport, Vec<CellReport>)> =
        cfg.seeds.par_iter().map(|&seed| run_seed(cfg, &ds, seed, &names)).collect();
    let mut seeds = Vec::with_capacity(per_seed.len());
    let mut cells = Vec::new();
    for (s, c) in per_seed {
        seeds.push(s);
        cells.extend(c);
    }
    let summary = summarize(&names, &cfg.metrics, &cells);
    let preservation = summarize_preservation(&cells);
    Ok(ReportBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        provenance: Provenance {
            config_hash: config_hash(cfg)?,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        },
        name: cfg.display_name(),
        dataset: cfg.dataset.display_name(),
        blackbox: cfg.blackbox.family,
        group_names: ds.group_names().to_vec(),
        config: cfg.clone(),
        seeds,
        cells,
        summary,
        preservation,
    })
}

fn run_seed(cfg: &ExperimentConfig, ds: &Dataset, seed: u64, names: &[String]) -> (SeedReport, Vec<CellReport>) {
    let mut report = SeedReport {
        seed,
        split_sizes: [0; 4],
        n_features: 0,
        blackbox: None,
        mi_filter: None,
        probe: None,
        error: None,
        predictor: None,
    };
    let prepared = match prepare_run(cfg, ds, seed) {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            return (report, Vec::new());
        }
    };
    let sp = &prepared.split;
    let enc = &prepared.encoded;
    report.split_sizes = [
        sp.blackbox_train.len(),
        sp.explainer_train.len(),
        sp.explainer_valid.len(),
        sp.test.len(),
    ];
    report.n_features = enc.n_features();
    report.mi_filter = prepared.mi_filter.clone();
    let model = &prepared.search.predictor;

    let performance = match eval_blackbox(model, &enc.select_rows(&sp.test)) {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            return (report, Vec::new());
        }
    };
    report.blackbox = Some(BlackboxSummary {
        config: prepared.search.best_config.clone(),
        grid_index: prepared.search.best_index,
        cv_auroc: prepared.search.cv_auroc.clone(),
        training: model.info().clone(),
        performance,
    });
    if let Some(p) = &cfg.probe {
        match group_probe(enc, p.folds, derive_seed(seed, STREAM_PROBE)) {
            Ok(r) => report.probe = Some(r),
            Err(e) => report.error = Some(format!("probe: {e}")),
        }
    }

    let m = cfg.max_test_points.unwrap_or(usize::MAX).min(sp.test.len());
    let points = sp.test[..m].to_vec();
    let test_x = enc.x.select_rows(&points);
    let ctx = SeedContext {
        seed,
        enc,
        split: sp,
        model,
        n_groups: enc.n_groups(),
        test_groups: points.iter().map(|&i| enc.groups[i]).collect(),
        blackbox_out: model.predict_batch(&test_x),
        test_x,
        points,
        dump: cfg.dump_explanations,
    };
    let cells = cfg
        .explainers
        .iter()
        .zip(names)
        .map(|(spec, name)| run_cell(cfg, &ctx, spec, name))
        .collect();
    report.predictor = Some(model.clone());
    (report, cells)
}

struct CellOutput {
    outputs: Vec<f64>,
    explanations: Vec<ExplanationRecord>,
    surrogate: Option<GlobalSurrogate>,
    lambda_selection: Option<LambdaSelection>,
    depth_selection: Option<DepthSelection>,
}

fn run_cell(cfg: &ExperimentConfig, ctx: &SeedContext, spec: &ExplainerSpec, name: &str) -> CellReport {
    let mut cell = CellReport {
        seed: ctx.seed,
        explainer: name.to_string(),
        kind: spec.kind,
        n_points: ctx.points.len(),
        gaps: Vec::new(),
        preservation: Vec::new(),
        lambda_selection: None,
        depth_selection: None,
        error: None,
        explanations: Vec::new(),
        surrogate: None,
    };
    let out = match explain(ctx, spec) {
        Ok(o) => o,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    let pairs = match FidelityPairs::new(ctx.blackbox_out.clone(), out.outputs, ctx.test_groups.clone()) {
        Ok(p) => p,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    cell.gaps = cfg.metrics.iter().map(|&m| gap_report(&pairs, ctx.n_groups, m)).collect();
    cell.preservation = preservation_checks(&pairs, ctx.n_groups);
    cell.lambda_selection = out.lambda_selection;
    cell.depth_selection = out.depth_selection;
    cell.explanations = out.explanations;
    cell.surrogate = out.surrogate;
    cell
}

fn preservation_checks(pairs: &FidelityPairs, n_groups: usize) -> Vec<GroupPreservation> {
    if n_groups == 2 {
        return preservation_check(pairs, &pairs.groups)
            .ok()
            .map(|check| GroupPreservation { group: 1, check })
            .into_iter()
            .collect();
    }
    (0..n_groups)
        .filter_map(|g| preservation_check_one_vs_rest(pairs, g).ok().map(|check| GroupPreservation { group: g, check }))
        .collect()
}

pub(crate) fn lime_config(spec: &ExplainerSpec, seed: u64) -> LimeConfig {
    let d = LimeConfig::default();
    LimeConfig {
        n_perturbations: spec.n_perturbations.unwrap_or(d.n_perturbations),
        sigma: spec.sigma.unwrap_or(d.sigma),
        k: spec.k,
        ridge_lambda: spec.ridge_lambda.unwrap_or(d.ridge_lambda),
        kernel_width: spec.kernel_width,
        kernel: spec.kernel.unwrap_or(d.kernel),
        clip_outputs: spec.clip_outputs,
        seed,
    }
}

fn training_rows(ctx: &SeedContext, balanced: bool) -> Result<Vec<usize>> {
    let rows = ctx.split.explainer_train.clone();
    if !balanced {
        return Ok(rows);
    }
    let strata: Vec<usize> = rows.iter().map(|&i| ctx.enc.groups[i]).collect();
    let idx = balanced_indices(&strata, derive_seed(ctx.seed, STREAM_SURROGATE), "group")?;
    Ok(idx.into_iter().map(|i| rows[i]).collect())
}

fn local_records(ctx: &SeedContext, expl: &[LocalExplanation]) -> Vec<ExplanationRecord> {
    if !ctx.dump {
        return Vec::new();
    }
    expl.iter()
        .zip(&ctx.points)
        .zip(&ctx.test_groups)
        .map(|((e, &p), &g)| e.record(p, g))
        .collect()
}

fn explain(ctx: &SeedContext, spec: &ExplainerSpec) -> Result<CellOutput> {
    let model: &dyn Blackbox = ctx.model;
    let n = ctx.points.len();
    let mut out = CellOutput {
        outputs: Vec::new(),
        explanations: Vec::new(),
        surrogate: None,
        lambda_selection: None,
        depth_selection: None,
    };
    match spec.kind {
        ExplainerKind::Lime | ExplainerKind::LimeJtt => {
            let lime = lime_config(spec, derive_seed(ctx.seed, STREAM_LOCAL));
            let jtt = if spec.kind == ExplainerKind::LimeJtt {
                let lambda_up = match spec.lambda_up {
                    Some(l) => l,
                    None => {
                        let valid = &ctx.split.explainer_valid;
                        let valid_x = ctx.enc.x.select_rows(valid);
                        let valid_groups: Vec<usize> = valid.iter().map(|&i| ctx.enc.groups[i]).collect();
                        let sel = select_lambda_up(
                            model,
                            &valid_x,
                            &valid_groups,
                            ctx.n_groups,
                            &lime_config(spec, derive_seed(ctx.seed, STREAM_VALID)),
                            &spec.lambda_grid(),
                            spec.selection_metric.unwrap_or(FidelityMetric::Auroc),
                        )?;
                        let l = sel.lambda_up;
                        out.lambda_selection = Some(sel);
                        l
                    }
                };
                Some(JttConfig::new(lambda_up)?)
            } else {
                None
            };
            let expl: Vec<LocalExplanation> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let c = lime.for_point(i);
                    match &jtt {
                        Some(j) => explain_lime_jtt(model, ctx.test_x.row(i), &c, j),
                        None => explain_lime(model, ctx.test_x.row(i), &c),
                    }
                })
                .collect::<Result<_>>()?;
            out.outputs = expl.iter().map(|e| e.explanation_output).collect();
            out.explanations = local_records(ctx, &expl);
        }
        ExplainerKind::KernelShap => {
            let pool = training_rows(ctx, spec.balanced)?;
            let size = spec.background_size.unwrap_or(DEFAULT_BACKGROUND).min(pool.len());
            let mut r = crate::rng::seeded(derive_seed(ctx.seed, STREAM_BACKGROUND));
            let chosen: Vec<usize> = rand::seq::index::sample(&mut r, pool.len(), size)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            let background = ctx.enc.x.select_rows(&chosen);
            let shap = ShapConfig {
                n_coalitions: spec.n_coalitions.unwrap_or(ShapConfig::default().n_coalitions),
                k: spec.k,
                seed: derive_seed(ctx.seed, STREAM_LOCAL),
                ..ShapConfig::default()
            };
            let expl: Vec<LocalExplanation> = (0..n)
                .into_par_iter()
                .map(|i| explain_kernel_shap(model, ctx.test_x.row(i), &background, &shap.for_point(i)))
                .collect::<Result<_>>()?;
            out.outputs = expl.iter().map(|e| e.explanation_output).collect();
            out.explanations = local_records(ctx, &expl);
        }
        ExplainerKind::Tree => {
            let train_x = ctx.enc.x.select_rows(&training_rows(ctx, spec.balanced)?);
            let min_leaf = spec.min_leaf.unwrap_or(DEFAULT_MIN_LEAF);
            let tree = match spec.max_depth {
                Some(depth) => fit_tree_surrogate(model, &train_x, Some(depth), min_leaf)?,
                None => {
                    let valid_x = ctx.enc.x.select_rows(&ctx.split.explainer_valid);
                    let (tree, sel) = tune_tree_depth(model, &train_x, &valid_x, &spec.depth_grid(), min_leaf)?;
                    out.depth_selection = Some(sel);
                    tree
                }
            };
            out.outputs = ctx.test_x.rows_iter().map(|r| tree.predict_row(r)).collect();
            out.surrogate = ctx.dump.then_some(GlobalSurrogate::Tree(tree));
        }
        ExplainerKind::Additive => {
            let train_x = ctx.enc.x.select_rows(&training_rows(ctx, spec.balanced)?);
            let d = AdditiveConfig::default();
            let acfg = AdditiveConfig {
                bins: spec.bins.unwrap_or(d.bins),
                target: spec.additive_target.unwrap_or(d.target),
                ..d
            };
            let gam = fit_additive_surrogate(model, &train_x, &acfg)?;
            out.outputs = ctx.test_x.rows_iter().map(|r| gam.predict_row(r)).collect();
            out.surrogate = ctx.dump.then_some(GlobalSurrogate::Additive(gam));
        }
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        (None, None)
    } else {
        (Some(mean(values)), Some(std_dev(values)))
    }
}

fn summarize(names: &[String], metrics: &[FidelityMetric], cells: &[CellReport]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for name in names {
        for &metric in metrics {
            let gaps: Vec<&GapReport> = cells
                .iter()
                .filter(|c| &c.explainer == name && c.error.is_none())
                .filter_map(|c| c.gap(metric))
                .collect();
            let overall: Vec<f64> = gaps.iter().filter_map(|g| g.overall).collect();
            let max_gap: Vec<f64> = gaps.iter().filter_map(|g| g.max_gap).collect();
            let pairwise: Vec<f64> = gaps.iter().filter_map(|g| g.mean_pairwise_gap).collect();
            let (fidelity_mean, fidelity_std) = mean_std(&overall);
            let (max_gap_mean, max_gap_std) = mean_std(&max_gap);
            let (pairwise_gap_mean, pairwise_gap_std) = mean_std(&pairwise);
            rows.push(SummaryRow {
                explainer: name.clone(),
                metric,
                n_seeds: gaps.len(),
                fidelity_mean,
                fidelity_std,
                max_gap_mean,
                max_gap_std,
                max_gap_p: (!max_gap.is_empty()).then(|| wilcoxon_one_sided(&max_gap).p_value),
                pairwise_gap_mean,
                pairwise_gap_std,
                pairwise_gap_p: (!pairwise.is_empty()).then(|| wilcoxon_one_sided(&pairwise).p_value),
            });
        }
    }
    rows
}

fn summarize_preservation(cells: &[CellReport]) -> PreservationSummary {
    let checks: Vec<&PreservationCheck> = cells.iter().flat_map(|c| c.preservation.iter().map(|p| &p.check)).collect();
    let lhs: Vec<f64> = checks.iter().map(|c| c.lhs).collect();
    let rhs: Vec<f64> = checks.iter().map(|c| c.rhs).collect();
    let diffs: Vec<f64> = checks.iter().map(|c| c.abs_diff).collect();
    let correlation = if checks.len() >= 2 {
        let r = pearson(&lhs, &rhs);
        r.is_finite().then_some(r)
    } else {
        None
    };
    PreservationSummary {
        n_checks: checks.len(),
        correlation,
        mean_abs_diff: (!diffs.is_empty()).then(|| mean(&diffs)),
        max_abs_diff: diffs.iter().copied().reduce(f64::max),
    }
}

/// Writes `report.json`, `summary.csv`, `fidelity_long.csv` and, when
/// requested, per-cell explanation, surrogate and model dumps.
pub fn write_outputs(bundle: &ReportBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = dir.join("report.json");
    std::fs::write(&report, bundle.to_json()?).map_err(|e| Error::io(&report, e))?;

    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    for row in &bundle.summary {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&summary, e))?;

    super::plot::emit_plot_data(bundle, dir)?;

    for s in &bundle.seeds {
        if let (true, Some(p)) = (bundle.config.dump_explanations, &s.predictor) {
            crate::blackbox::save_model(p, dir.join(format!("model_seed{}.json", s.seed)))?;
        }
    }
    for c in &bundle.cells {
        if !c.explanations.is_empty() {
            let path = dir.join(format!("explanations_{}_seed{}.jsonl", c.explainer, c.seed));
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
            crate::local::write_explanations(&mut f, &c.explanations)?;
        }
        if let Some(s) = &c.surrogate {
            let path = dir.join(format!("surrogate_{}_seed{}.json", c.explainer, c.seed));
            std::fs::write(&path, crate::global::surrogate_to_json(s)?).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}
