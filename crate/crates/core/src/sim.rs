//! Monte Carlo model of human decision accuracy when explanation quality
//! differs between two groups.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean, std_dev};
use crate::rng;

/// Probability that a user decides correctly, by whether the blackbox was
/// right and whether the explanation was good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub wrong_good: f64,
    pub wrong_poor: f64,
    pub right_good: f64,
    pub right_poor: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            wrong_good: 0.6497,
            wrong_poor: 0.68,
            right_good: 0.9281,
            right_poor: 0.90,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        for p in [self.wrong_good, self.wrong_poor, self.right_good, self.right_poor] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("simulation probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn p_correct(&self, blackbox_right: bool, good: bool) -> f64 {
        match (blackbox_right, good) {
            (true, true) => self.right_good,
            (true, false) => self.right_poor,
            (false, true) => self.wrong_good,
            (false, false) => self.wrong_poor,
        }
    }
}

/// Expected decision accuracy for blackbox accuracy `a` and explanation
/// fidelity `f`.
pub fn closed_form_accuracy(a: f64, f: f64, params: &SimParams) -> f64 {
    a * (f * params.right_good + (1.0 - f) * params.right_poor)
        + (1.0 - a) * (f * params.wrong_good + (1.0 - f) * params.wrong_poor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SimMode {
    /// Synthetic instances: labels with the given prevalence, blackbox
    /// correctness drawn from per-group accuracy.
    Parametric {
        group_accuracy: [f64; 2],
        n_per_group: usize,
        prevalence: f64,
    },
    /// Fixed instances from a labeled split and real blackbox predictions.
    DatasetDriven {
        labels: Vec<u8>,
        predictions: Vec<u8>,
        groups: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: SimMode,
    pub mean_fidelity: f64,
    /// Fidelity gaps to sweep; group fidelities are `mean_fidelity +/- delta`.
    pub deltas: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    /// Group receiving `mean_fidelity + delta`.
    pub advantaged_group: usize,
}

impl SimConfig {
    pub fn parametric(group_accuracy: [f64; 2]) -> Self {
        Self {
            mode: SimMode::Parametric {
                group_accuracy,
                n_per_group: 10_000,
                prevalence: 0.5,
            },
            mean_fidelity: 0.85,
            deltas: vec![0.0, 0.05, 0.10, 0.15],
            runs: 20,
            seed: 0,
            advantaged_group: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub delta: f64,
    pub group: usize,
    pub run: usize,
    pub accuracy: f64,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub delta: f64,
    pub group: usize,
    pub fidelity: f64,
    pub mean: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub f1_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub records: Vec<SimRecord>,
    pub summary: Vec<SimSummary>,
    /// Advantaged minus disadvantaged mean decision accuracy, per delta.
    pub accuracy_gap: Vec<(f64, f64)>,
}

struct Instance {
    label: u8,
    blackbox_right: bool,
}

fn f1(decisions: &[u8], labels: &[u8]) -> Option<f64> {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fne = 0.0;
    for (&d, &y) in decisions.iter().zip(labels) {
        match (d, y) {
            (1, 1) => tp += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => fne += 1.0,
            _ => {}
        }
    }
    let denom = 2.0 * tp + fp + fne;
    (denom > 0.0).then(|| 2.0 * tp / denom)
}

/// Runs every (delta, run) replication. Each instance consumes uniforms in
/// a fixed order (label, blackbox, explanation, user), and run seeds depend
/// only on the run index, so different deltas see common random numbers.
pub fn simulate(cfg: &SimConfig, params: &SimParams) -> Result<SimResult> {
    params.validate()?;
    if cfg.runs == 0 || cfg.deltas.is_empty() {
        return Err(Error::InvalidArgument("simulation needs at least one run and one delta".into()));
    }
    if cfg.advantaged_group > 1 {
        return Err(Error::InvalidArgument("advantaged group must be 0 or 1".into()));
    }
    for &d in &cfg.deltas {
        for f in [cfg.mean_fidelity + d, cfg.mean_fidelity - d] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InfeasibleFidelity(f));
            }
        }
    }
    match &cfg.mode {
        SimMode::Parametric {
            group_accuracy,
            prevalence,
            n_per_group,
        } => {
            for &p in group_accuracy.iter().chain(std::iter::once(prevalence)) {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
                }
            }
            if *n_per_group == 0 {
                return Err(Error::InvalidArgument("n_per_group must be positive".into()));
            }
        }
        SimMode::DatasetDriven {
            labels,
            predictions,
            groups,
        } => {
            if labels.len() != predictions.len() || labels.len() != groups.len() {
                return Err(Error::InvalidArgument("dataset-driven inputs have mismatched lengths".into()));
            }
            if groups.iter().any(|&g| g > 1) {
                return Err(Error::InvalidArgument("dataset-driven simulation needs exactly two groups".into()));
            }
            if !(groups.contains(&0) && groups.contains(&1)) {
                return Err(Error::SingleGroup);
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.deltas.len())
        .flat_map(|d| (0..cfg.runs).map(move |r| (d, r)))
        .collect();
    let outcomes: Vec<[(f64, Option<f64>); 2]> = jobs
        .par_iter()
        .map(|&(di, run)| run_once(cfg, params, cfg.deltas[di], run))
        .collect();

    let mut records = Vec::with_capacity(outcomes.len() * 2);
    for (&(di, run), out) in jobs.iter().zip(&outcomes) {
        for (g, &(accuracy, f1)) in out.iter().enumerate() {
            records.push(SimRecord {
                delta: cfg.deltas[di],
                group: g,
                run,
                accuracy,
                f1,
            });
        }
    }
    let mut summary = Vec::new();
    let mut accuracy_gap = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let mut means = [0.0; 2];
        for g in 0..2 {
            let acc: Vec<f64> = (0..cfg.runs).map(|r| outcomes[di * cfg.runs + r][g].0).collect();
            let f1s: Vec<f64> = (0..cfg.runs).filter_map(|r| outcomes[di * cfg.runs + r][g].1).collect();
            let m = mean(&acc);
            let se = if cfg.runs > 1 {
                std_dev(&acc) / (cfg.runs as f64).sqrt()
            } else {
                0.0
            };
            means[g] = m;
            summary.push(SimSummary {
                delta,
                group: g,
                fidelity: group_fidelity(cfg, g, delta),
                mean: m,
                std_error: se,
                ci_lo: m - 1.96 * se,
                ci_hi: m + 1.96 * se,
                f1_mean: (!f1s.is_empty()).then(|| mean(&f1s)),
            });
        }
        let adv = cfg.advantaged_group;
        accuracy_gap.push((delta, means[adv] - means[1 - adv]));
    }
    Ok(SimResult {
        records,
        summary,
        accuracy_gap,
    })
}

fn group_fidelity(cfg: &SimConfig, group: usize, delta: f64) -> f64 {
    if group == cfg.advantaged_group {
        cfg.mean_fidelity + delta
    } else {
        cfg.mean_fidelity - delta
    }
}

fn run_once(cfg: &SimConfig, params: &SimParams, delta: f64, run: usize) -> [(f64, Option<f64>); 2] {
    let mut r = rng::seeded(rng::derive_seed(cfg.seed, run as u64));
    let mut out = [(0.0, None); 2];
    for (g, slot) in out.iter_mut().enumerate() {
        let fid = group_fidelity(cfg, g, delta);
        let mut labels = Vec::new();
        let mut decisions = Vec::new();
        let mut decide = |inst: Instance, u_expl: f64, u_user: f64| {
            let good = u_expl < fid;
            let correct = u_user < params.p_correct(inst.blackbox_right, good);
            labels.push(inst.label);
            decisions.push(if correct { inst.label } else { 1 - inst.label });
        };
        match &cfg.mode {
            SimMode::Parametric {
                group_accuracy,
                n_per_group,
                prevalence,
            } => {
                for _ in 0..*n_per_group {
                    let u_label: f64 = r.random();
                    let u_bb: f64 = r.random();
                    let u_expl: f64 = r.random();
                    let u_user: f64 = r.random();
                    let inst = Instance {
                        label: u8::from(u_label < *prevalence),
                        blackbox_right: u_bb < group_accuracy[g],
                    };
                    decide(inst, u_expl, u_user);
                }
            }
            SimMode::DatasetDriven {
                labels: ys,
                predictions,
                groups,
            } => {
                for i in (0..ys.len()).filter(|&i| groups[i] == g) {
                    let u_expl: f64 = r.random();
                    let u_user: f64 = r.random();
                    let inst = Instance {
                        label: ys[i],
                        blackbox_right: predictions[i] == ys[i],
                    };
                    decide(inst, u_expl, u_user);
                }
            }
        }
        let hits = decisions.iter().zip(&labels).filter(|(d, y)| d == y).count();
        *slot = (hits as f64 / labels.len() as f64, f1(&decisions, &labels));
    }
    out
}

pub fn write_sim_records<W: Write>(out: W, records: &[SimRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "group", "run", "accuracy", "f1"])?;
    for r in records {
        w.write_record([
            r.delta.to_string(),
            r.group.to_string(),
            r.run.to_string(),
            r.accuracy.to_string(),
            r.f1.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<simulation records>", e))?;
    Ok(())
}

pub fn write_sim_summary<W: Write>(out: W, summary: &[SimSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "group", "fidelity", "mean", "ci_lo", "ci_hi"])?;
    for s in summary {
        w.write_record([
            s.delta.to_string(),
            s.group.to_string(),
            s.fidelity.to_string(),
            s.mean.to_string(),
            s.ci_lo.to_string(),
            s.ci_hi.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<simulation summary>", e))?;
    Ok(())
}
