use std::io::Write;

use serde::{Deserialize, Serialize};

use super::audit::{run_audit, ReportBundle};
use super::config::{ExperimentConfig, ExplainerKind, SweepParam};
use crate::error::{Error, Result};

/// Copy of `cfg` with `param` set to `value` on every explainer it applies to.
pub fn apply_sweep_value(cfg: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig> {
    let as_count = || -> Result<usize> {
        if value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64 {
            Ok(value as usize)
        } else {
            Err(Error::ConfigInvalid(format!("{} must be a positive integer, got {value}", param.name())))
        }
    };
    let mut out = cfg.clone();
    let mut touched = 0;
    for e in &mut out.explainers {
        match param {
            SweepParam::K if e.kind.is_local() => {
                e.k = Some(as_count()?);
                touched += 1;
            }
            SweepParam::Sigma if matches!(e.kind, ExplainerKind::Lime | ExplainerKind::LimeJtt) => {
                if !(value >= 0.0) {
                    return Err(Error::ConfigInvalid(format!("sigma must be nonnegative, got {value}")));
                }
                e.sigma = Some(value);
                touched += 1;
            }
            SweepParam::MaxDepth if e.kind == ExplainerKind::Tree => {
                e.max_depth = Some(as_count()?);
                touched += 1;
            }
            _ => {}
        }
    }
    if touched == 0 {
        return Err(Error::ConfigInvalid(format!("no configured explainer uses `{}`", param.name())));
    }
    out.sweep = None;
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub bundle: ReportBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

/// One full audit per value.
pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::ConfigInvalid("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| apply_sweep_value(cfg, param, v))
        .collect::<Result<Vec<_>>>()?;
    let points = values
        .iter()
        .zip(configs)
        .map(|(&value, c)| Ok(SweepPoint { value, bundle: run_audit(&c)? }))
        .collect::<Result<_>>()?;
    Ok(SweepResult { param, points })
}

/// Long-format sweep row. `quantity` is `overall`, `max_gap`,
/// `mean_pairwise_gap`, or `group:<name>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: String,
    pub param_value: f64,
    pub explainer: String,
    pub metric: String,
    pub seed: u64,
    pub quantity: String,
    pub estimate: Option<f64>,
}

pub fn sweep_records(result: &SweepResult) -> Vec<SweepRecord> {
    let mut rows = Vec::new();
    for p in &result.points {
        for c in &p.bundle.cells {
            for g in &c.gaps {
                let mut push = |quantity: String, estimate: Option<f64>| {
                    rows.push(SweepRecord {
                        param: result.param.name().to_string(),
                        param_value: p.value,
                        explainer: c.explainer.clone(),
                        metric: g.metric.name().to_string(),
                        seed: c.seed,
                        quantity,
                        estimate,
                    })
                };
                push("overall".into(), g.overall);
                push("max_gap".into(), g.max_gap);
                push("mean_pairwise_gap".into(), g.mean_pairwise_gap);
                for (name, v) in p.bundle.group_names.iter().zip(&g.per_group) {
                    push(format!("group:{name}"), *v);
                }
            }
        }
    }
    rows
}

pub fn write_sweep_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<sweep records>", e))?;
    Ok(())
}
