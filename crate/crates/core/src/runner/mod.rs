//! Experiment orchestration: configuration, audits over seeds, parameter
//! sweeps, the decision simulator and plot-ready exports.

pub mod audit;
pub mod config;
pub mod plot;
pub mod sweep;

use serde::{Deserialize, Serialize};

use crate::blackbox::Blackbox;
use crate::error::{Error, Result};
use crate::metrics::fidelity::threshold;
use crate::metrics::probe::DEFAULT_MI_THRESHOLD;
use crate::metrics::{group_probe, mi_report, MiFilterReport, ProbeReport};
use crate::rng::derive_seed;
use crate::sim::{simulate, SimConfig, SimMode, SimResult};

pub use audit::{
    config_hash, load_experiment_dataset, prepare_run, run_audit, write_outputs, CellReport, PreparedRun,
    ReportBundle, SeedReport, SummaryRow,
};
pub use config::{
    BlackboxSpec, DatasetSpec, ExperimentConfig, ExplainerKind, ExplainerSpec, ProbeSpec, SimulationSource,
    SimulationSpec, SweepParam, SweepSpec,
};
pub use plot::{emit_plot_data, plot_rows, read_plot_csv, write_plot_csv, PlotRow};
pub use sweep::{apply_sweep_value, run_sweep, sweep_records, write_sweep_csv, SweepRecord, SweepResult};

/// Runs the `[simulation]` section. Dataset-driven mode trains the blackbox
/// under the first seed and uses its test-split predictions.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimResult> {
    let spec = cfg
        .simulation
        .clone()
        .ok_or_else(|| Error::ConfigInvalid("config has no [simulation] section".into()))?;
    let seed = cfg.seeds[0];
    let mode = match spec.mode {
        SimulationSource::Parametric => SimMode::Parametric {
            group_accuracy: spec.group_accuracy,
            n_per_group: spec.n_per_group,
            prevalence: spec.prevalence,
        },
        SimulationSource::DatasetDriven => {
            let ds = load_experiment_dataset(cfg)?;
            let run = prepare_run(cfg, &ds, seed)?;
            let test = run.encoded.select_rows(&run.split.test);
            let predictions = run.search.predictor.predict_batch(&test.x).into_iter().map(threshold).collect();
            SimMode::DatasetDriven {
                labels: test.labels,
                predictions,
                groups: test.groups,
            }
        }
    };
    let sim = SimConfig {
        mode,
        mean_fidelity: spec.mean_fidelity,
        deltas: spec.deltas,
        runs: spec.runs,
        seed,
        advantaged_group: spec.advantaged_group,
    };
    simulate(&sim, &spec.params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub seed: u64,
    /// Group predictability from all encoded features.
    pub probe: ProbeReport,
    pub mi_filter: MiFilterReport,
    /// Group predictability after dropping the filtered features; `None`
    /// when nothing or everything was dropped.
    pub probe_filtered: Option<ProbeReport>,
}

/// Group probe and mutual-information screen under the first seed. The
/// encoder and the MI statistics are fit on the blackbox training split;
/// the probe is cross-validated over all rows.
pub fn run_probe(cfg: &ExperimentConfig) -> Result<ProbeOutcome> {
    let ds = load_experiment_dataset(cfg)?;
    let seed = cfg.seeds[0];
    let (folds, threshold) = match &cfg.probe {
        Some(p) => (p.folds, p.mi_threshold.or(cfg.dataset.mi_filter).unwrap_or(DEFAULT_MI_THRESHOLD)),
        None => (5, cfg.dataset.mi_filter.unwrap_or(DEFAULT_MI_THRESHOLD)),
    };
    let sp = crate::dataset::split(ds.n_rows(), seed)?;
    let enc = crate::dataset::encode(&ds, &sp.blackbox_train)?;
    let probe_seed = derive_seed(seed, 7);
    let probe = group_probe(&enc, folds, probe_seed)?;
    let report = mi_report(&enc.select_rows(&sp.blackbox_train), threshold)?;
    let probe_filtered = if report.dropped.is_empty() || report.kept.is_empty() {
        None
    } else {
        Some(group_probe(&enc.select_features(&report.kept), folds, probe_seed)?)
    };
    Ok(ProbeOutcome {
        seed,
        probe,
        mi_filter: report,
        probe_filtered,
    })
}
