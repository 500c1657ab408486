use serde::{Deserialize, Serialize};

use super::auroc::auroc;
use crate::blackbox::logistic::train_logistic;
use crate::blackbox::tuning::kfold_assignments;
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};

pub const PROBE_L2: f64 = 1e-3;
pub const MI_BINS: usize = 10;
pub const DEFAULT_MI_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub group_names: Vec<String>,
    /// Out-of-fold AUROC of a one-vs-rest logistic classifier per group;
    /// `None` when a group is absent.
    pub auroc: Vec<Option<f64>>,
    pub folds: usize,
}

/// How well protected-group membership can be predicted from the features
/// alone: cross-validated one-vs-rest logistic regression per group.
pub fn group_probe(data: &EncodedDataset, folds: usize, seed: u64) -> Result<ProbeReport> {
    let n_groups = data.n_groups();
    let present = (0..n_groups)
        .filter(|g| data.groups.contains(g))
        .count();
    if present < 2 {
        return Err(Error::SingleGroup);
    }
    if folds < 2 || folds > data.n_rows() {
        return Err(Error::InvalidArgument(format!("cannot run {folds}-fold probe")));
    }
    let assignment = kfold_assignments(data.n_rows(), folds, seed);
    let mut out = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let target: Vec<u8> = data.groups.iter().map(|&x| u8::from(x == g)).collect();
        if !target.contains(&1) {
            out.push(None);
            continue;
        }
        let mut scores = vec![0.0; data.n_rows()];
        for fold in 0..folds {
            let train: Vec<usize> = (0..data.n_rows()).filter(|&i| assignment[i] != fold).collect();
            let held: Vec<usize> = (0..data.n_rows()).filter(|&i| assignment[i] == fold).collect();
            let x_train = data.x.select_rows(&train);
            let y_train: Vec<u8> = train.iter().map(|&i| target[i]).collect();
            match train_logistic(&x_train, &y_train, PROBE_L2) {
                Ok(model) => {
                    for &i in &held {
                        scores[i] = model.predict_proba(data.x.row(i));
                    }
                }
                Err(Error::SingleClass) => {
                    let constant = f64::from(y_train.first().copied().unwrap_or(0));
                    for &i in &held {
                        scores[i] = constant;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        out.push(auroc(&scores, &target).ok());
    }
    Ok(ProbeReport {
        group_names: data.group_names.clone(),
        auroc: out,
        folds,
    })
}

fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= bins {
        return values
            .iter()
            .map(|v| distinct.partition_point(|d| d < v))
            .collect();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins).map(|q| sorted[q * n / bins]).collect();
    edges.dedup();
    values.iter().map(|v| edges.partition_point(|e| e <= v)).collect()
}

/// Plug-in mutual information (nats) between a discretized feature and the
/// group label.
pub fn mutual_information(values: &[f64], groups: &[usize], n_groups: usize, bins: usize) -> f64 {
    let codes = discretize(values, bins);
    let n_codes = codes.iter().copied().max().map_or(0, |m| m + 1);
    let mut joint = vec![0.0; n_codes * n_groups];
    for (&c, &g) in codes.iter().zip(groups) {
        joint[c * n_groups + g] += 1.0;
    }
    let n = values.len() as f64;
    let pc: Vec<f64> = (0..n_codes)
        .map(|c| joint[c * n_groups..(c + 1) * n_groups].iter().sum::<f64>() / n)
        .collect();
    let pg: Vec<f64> = (0..n_groups)
        .map(|g| (0..n_codes).map(|c| joint[c * n_groups + g]).sum::<f64>() / n)
        .collect();
    let mut mi = 0.0;
    for c in 0..n_codes {
        for g in 0..n_groups {
            let p = joint[c * n_groups + g] / n;
            if p > 0.0 {
                mi += p * (p / (pc[c] * pg[g])).ln();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiFilterReport {
    pub threshold: f64,
    pub mutual_information: Vec<f64>,
    pub feature_names: Vec<String>,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Per-feature mutual information with the group label and the resulting
/// keep/drop split, without building the reduced dataset.
pub fn mi_report(data: &EncodedDataset, threshold: f64) -> Result<MiFilterReport> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument("MI threshold must be nonnegative".into()));
    }
    let n_groups = data.n_groups();
    let mi: Vec<f64> = (0..data.n_features())
        .map(|j| mutual_information(&data.x.column(j), &data.groups, n_groups, MI_BINS))
        .collect();
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..data.n_features()).partition(|&j| mi[j] <= threshold);
    Ok(MiFilterReport {
        threshold,
        mutual_information: mi,
        feature_names: data.feature_names(),
        kept,
        dropped,
    })
}

/// Keeps only features whose mutual information with the group label is at
/// most `threshold` nats. Continuous features are cut into 10 quantile bins.
pub fn mi_filter(data: &EncodedDataset, threshold: f64) -> Result<(EncodedDataset, MiFilterReport)> {
    let report = mi_report(data, threshold)?;
    if report.kept.is_empty() {
        log::warn!("mutual-information filter at {threshold} removed every feature");
        return Err(Error::AllFeaturesDropped);
    }
    Ok((data.select_features(&report.kept), report))
}
